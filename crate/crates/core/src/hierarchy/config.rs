use std::collections::BTreeMap;

use super::HierError;
use crate::autodiff::DEFAULT_LEARNING_RATE;

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HierError> {
    value
        .trim()
        .parse()
        .map_err(|_| HierError::Config(format!("`{key}`: cannot parse `{value}`")))
}

macro_rules! hier_config {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty = $default:expr ),* $(,)?) => {
        /// Architecture, loss and training settings of the gesture generator.
        #[derive(Clone, Debug, PartialEq)]
        pub struct HierConfig {
            $( $(#[$doc])* pub $field: $ty, )*
        }

        impl Default for HierConfig {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        impl HierConfig {
            pub const KEYS: &'static [&'static str] = &[$( stringify!($field), )*];

            /// Sets one field from its key and textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<(), HierError> {
                match key {
                    $( stringify!($field) => self.$field = parse(key, value)?, )*
                    _ => return Err(HierError::Config(format!("unknown key `{key}`"))),
                }
                Ok(())
            }

            pub fn to_pairs(&self) -> BTreeMap<String, String> {
                let mut m = BTreeMap::new();
                $( m.insert(stringify!($field).to_string(), self.$field.to_string()); )*
                m
            }
        }
    };
}

hier_config! {
    /// Frames per window.
    window: usize = 34,
    fps: f64 = 15.0,
    /// Width of the per-frame audio features (log-mel bands).
    audio_dim: usize = 24,
    text_dim: usize = 8,
    emotion_dim: usize = 8,
    identity_dim: usize = 8,
    /// Replace an absent text track with zeros instead of failing.
    text_zero_fill: bool = true,
    /// Width of the two dense layers in front of the face decoder.
    face_hidden: usize = 64,
    face_recurrent: usize = 32,
    face_conv: usize = 64,
    /// Run the face recurrence in both directions. Turning this off makes
    /// the face decoder causal.
    face_bidirectional: bool = true,
    /// Width of every causal convolution.
    kernel_width: usize = 3,
    fusion_recurrent: usize = 64,
    fused_dim: usize = 128,
    body_hidden: usize = 64,
    hand_hidden: usize = 64,
    /// Latent channels of the periodic autoencoder supplying pseudo labels.
    latent_channels: usize = 10,
    period_recurrent: usize = 32,
    gate_hidden: usize = 32,
    expert_hidden: usize = 32,
    experts: usize = 4,
    gate_temperature: f64 = 1.0,
    moe_enabled: bool = true,
    /// Velocity weight of the gesture reconstruction loss.
    velocity_weight: f64 = 0.1,
    face_mse_weight: f64 = 1.0,
    face_velocity_weight: f64 = 0.1,
    /// Weight of the periodic-parameter matching term.
    param_weight: f64 = 1.0,
    /// Feed the ground-truth face track to the fusion net during training.
    teacher_forcing: bool = true,
    learning_rate: f64 = DEFAULT_LEARNING_RATE,
    epochs: usize = 100,
    batch_size: usize = 16,
    seed: u64 = 0,
}

impl HierConfig {
    pub fn validate(&self) -> Result<(), HierError> {
        let fail = |m: String| Err(HierError::Config(m));
        let widths = [
            ("audio_dim", self.audio_dim),
            ("emotion_dim", self.emotion_dim),
            ("identity_dim", self.identity_dim),
            ("face_hidden", self.face_hidden),
            ("face_recurrent", self.face_recurrent),
            ("face_conv", self.face_conv),
            ("fusion_recurrent", self.fusion_recurrent),
            ("fused_dim", self.fused_dim),
            ("body_hidden", self.body_hidden),
            ("hand_hidden", self.hand_hidden),
            ("latent_channels", self.latent_channels),
            ("period_recurrent", self.period_recurrent),
            ("gate_hidden", self.gate_hidden),
            ("expert_hidden", self.expert_hidden),
            ("experts", self.experts),
            ("kernel_width", self.kernel_width),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in widths {
            if v == 0 {
                return fail(format!("`{name}` must be at least 1"));
            }
        }
        if self.window < 2 {
            return fail(format!("window {} must be at least 2", self.window));
        }
        let positive = [
            ("fps", self.fps),
            ("learning_rate", self.learning_rate),
            ("gate_temperature", self.gate_temperature),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("`{name}` = {v} must be positive"));
            }
        }
        let weights = [
            ("velocity_weight", self.velocity_weight),
            ("face_mse_weight", self.face_mse_weight),
            ("face_velocity_weight", self.face_velocity_weight),
            ("param_weight", self.param_weight),
        ];
        for (name, v) in weights {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("`{name}` = {v} must be >= 0"));
            }
        }
        Ok(())
    }

    /// Rebuilds a config from [`HierConfig::to_pairs`] output, ignoring
    /// keys it does not know.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, HierError> {
        let mut cfg = Self::default();
        for key in Self::KEYS {
            if let Some(v) = pairs.get(*key) {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = HierConfig::default();
        c.validate().unwrap();
        assert_eq!(c.fused_dim, 128);
        assert_eq!(c.experts, 4);
        assert_eq!(c.learning_rate, 5.0e-4);
    }

    #[test]
    fn pairs_round_trip() {
        let mut c = HierConfig::default();
        c.set("experts", "2").unwrap();
        c.set("moe_enabled", "false").unwrap();
        c.set("gate_temperature", "0.5").unwrap();
        assert_eq!(HierConfig::from_pairs(&c.to_pairs()).unwrap(), c);
        assert_eq!(c.to_pairs().len(), HierConfig::KEYS.len());
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("experts", "two").is_err());
        c.experts = 0;
        assert!(c.validate().is_err());
    }
}
