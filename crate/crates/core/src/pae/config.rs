use std::collections::BTreeMap;

use super::PaeError;
use crate::autodiff::DEFAULT_LEARNING_RATE;

/// Architecture and training settings of the periodic autoencoder.
#[derive(Clone, Debug, PartialEq)]
pub struct PaeConfig {
    /// Motion channels per frame (141 for body + hands).
    pub input_channels: usize,
    /// Latent channels `N`, each parameterized as one sinusoid.
    pub latent_channels: usize,
    /// Frames per window `T`; must be even.
    pub window: usize,
    pub hidden_channels: usize,
    /// Odd convolution width used by every layer.
    pub kernel_width: usize,
    /// Weight of the velocity term in the reconstruction loss.
    pub velocity_weight: f64,
    /// Frame rate used for the velocity time step.
    pub fps: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub nonperiodic_enabled: bool,
    pub seed: u64,
}

impl Default for PaeConfig {
    fn default() -> Self {
        Self {
            input_channels: 141,
            latent_channels: 10,
            window: 34,
            hidden_channels: 64,
            kernel_width: 5,
            velocity_weight: 0.1,
            fps: 15.0,
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: 100,
            batch_size: 16,
            nonperiodic_enabled: true,
            seed: 0,
        }
    }
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PaeError> {
    value
        .trim()
        .parse()
        .map_err(|_| PaeError::Config(format!("`{key}`: cannot parse `{value}`")))
}

impl PaeConfig {
    pub const KEYS: [&'static str; 12] = [
        "input_channels",
        "latent_channels",
        "window",
        "hidden_channels",
        "kernel_width",
        "velocity_weight",
        "fps",
        "learning_rate",
        "epochs",
        "batch_size",
        "nonperiodic_enabled",
        "seed",
    ];

    pub fn validate(&self) -> Result<(), PaeError> {
        let fail = |m: String| Err(PaeError::Config(m));
        if self.latent_channels == 0 || self.input_channels == 0 || self.hidden_channels == 0 {
            return fail("channel counts must be at least 1".into());
        }
        if self.window < 2 || !self.window.is_multiple_of(2) {
            return fail(format!("window {} must be even and at least 2", self.window));
        }
        if self.kernel_width == 0 || self.kernel_width.is_multiple_of(2) {
            return fail(format!("kernel width {} must be odd", self.kernel_width));
        }
        if !(self.velocity_weight >= 0.0 && self.velocity_weight.is_finite()) {
            return fail(format!("velocity weight {} must be >= 0", self.velocity_weight));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return fail(format!("fps {} must be positive", self.fps));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        Ok(())
    }

    /// Sets one field from its key and textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PaeError> {
        match key {
            "input_channels" => self.input_channels = parse_value(key, value)?,
            "latent_channels" => self.latent_channels = parse_value(key, value)?,
            "window" => self.window = parse_value(key, value)?,
            "hidden_channels" => self.hidden_channels = parse_value(key, value)?,
            "kernel_width" => self.kernel_width = parse_value(key, value)?,
            "velocity_weight" => self.velocity_weight = parse_value(key, value)?,
            "fps" => self.fps = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "nonperiodic_enabled" => self.nonperiodic_enabled = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Err(PaeError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let values = [
            self.input_channels.to_string(),
            self.latent_channels.to_string(),
            self.window.to_string(),
            self.hidden_channels.to_string(),
            self.kernel_width.to_string(),
            self.velocity_weight.to_string(),
            self.fps.to_string(),
            self.learning_rate.to_string(),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.nonperiodic_enabled.to_string(),
            self.seed.to_string(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// Rebuilds a config from [`PaeConfig::to_pairs`] output, ignoring
    /// keys it does not know.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, PaeError> {
        let mut cfg = Self::default();
        for key in Self::KEYS {
            if let Some(v) = pairs.get(key) {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
