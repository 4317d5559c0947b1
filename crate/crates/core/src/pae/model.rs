use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{PaeConfig, PaeError};
use crate::autodiff::{
    read_checkpoint, write_checkpoint, AutodiffError, Conv1d, ConvSpec, Graph, ParamStore, Tensor, Var,
};
use crate::spectrum::PeriodicParams;
use crate::Matrix;

const NORM_EPS: f64 = 1e-5;
const PHASE_WX: &str = "phase.wx";
const PHASE_WY: &str = "phase.wy";
const PHASE_BX: &str = "phase.bx";
const PHASE_BY: &str = "phase.by";

/// Graph nodes produced by one forward pass over a window.
#[derive(Clone, Copy, Debug)]
pub struct PaeForward {
    /// `T × N` encoder output.
    pub latent: Var,
    /// `N × 3` rows `(A, F, B)`.
    pub params: Var,
    /// `N × 1` phase shifts in cycles.
    pub phase: Var,
    /// `T × N` sinusoidal reconstruction of the latent.
    pub periodic: Var,
    pub nonperiodic: Option<Var>,
    /// What the decoder received: `periodic + nonperiodic`, or `periodic`
    /// when the non-periodic branch is disabled.
    pub decoder_input: Var,
    /// `T × C` reconstruction.
    pub output: Var,
}

/// Scalar loss nodes of [`loss_rec`].
#[derive(Clone, Copy, Debug)]
pub struct RecLoss {
    pub total: Var,
    pub l1: Var,
    pub velocity: Var,
}

/// `L1(C, Ĉ) + λ_u · velocity_l1(C, Ĉ, dt)`.
pub fn loss_rec(
    g: &mut Graph,
    target: Var,
    recon: Var,
    velocity_weight: f64,
    dt: f64,
) -> Result<RecLoss, AutodiffError> {
    let l1 = g.l1(recon, target)?;
    let velocity = g.velocity_l1(recon, target, dt)?;
    let weighted = g.scale(velocity, velocity_weight)?;
    let total = g.add(l1, weighted)?;
    Ok(RecLoss { total, l1, velocity })
}

/// Plain-value results of running the model on one window.
#[derive(Clone, Debug, PartialEq)]
pub struct PaeOutput {
    pub latent: Matrix,
    pub params: Vec<PeriodicParams>,
    pub periodic: Matrix,
    pub nonperiodic: Option<Matrix>,
    pub reconstruction: Matrix,
}

/// Mean-removed projection weights whose `atan2` recovers the phase shift of
/// a bin-aligned sinusoid at `frequency` cycles per frame.
///
/// For `y = A sin(2π(F t - S)) + B`, `Σ y wx ∝ A cos 2πS` and
/// `Σ y wy ∝ A sin 2πS`.
pub fn analytic_phase_weights(frequency: f64, window: usize) -> (Vec<f64>, Vec<f64>) {
    let scale = 2.0 / window as f64;
    let mut wx: Vec<f64> = (0..window)
        .map(|t| scale * (2.0 * PI * frequency * t as f64).sin())
        .collect();
    let mut wy: Vec<f64> = (0..window)
        .map(|t| -scale * (2.0 * PI * frequency * t as f64).cos())
        .collect();
    for w in [&mut wx, &mut wy] {
        let m = w.iter().sum::<f64>() / window as f64;
        w.iter_mut().for_each(|v| *v -= m);
    }
    (wx, wy)
}

/// Encoder, phase head, non-periodic branch and decoder parameters.
#[derive(Clone, Debug)]
pub struct PaeModel {
    config: PaeConfig,
    store: ParamStore,
    enc_in: Conv1d,
    enc_out: Conv1d,
    np_in: Conv1d,
    np_out: Conv1d,
    dec: Conv1d,
}

impl PaeModel {
    fn layers(config: &PaeConfig) -> [Conv1d; 5] {
        let same = ConvSpec::same(config.kernel_width, 1);
        let (c, h, n, w) = (
            config.input_channels,
            config.hidden_channels,
            config.latent_channels,
            config.kernel_width,
        );
        [
            Conv1d::new("enc.0", c, h, w, same, true),
            Conv1d::new("enc.1", h, n, w, same, true),
            Conv1d::new("np.0", n, n, w, same, true),
            Conv1d::new("np.1", n, n, w, same, true),
            Conv1d::new("dec", n, c, w, same, true),
        ]
    }

    fn assemble(config: PaeConfig, store: ParamStore) -> Self {
        let [enc_in, enc_out, np_in, np_out, dec] = Self::layers(&config);
        Self {
            config,
            store,
            enc_in,
            enc_out,
            np_in,
            np_out,
            dec,
        }
    }

    /// Fresh model with seeded weights. The phase head starts at the
    /// analytic projection for frequency `1/T`; [`crate::pae::train`]
    /// re-seeds it from the data.
    pub fn new(config: PaeConfig) -> Result<Self, PaeError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        for layer in Self::layers(&config) {
            layer.init(&mut store, &mut rng)?;
        }
        let (n, t) = (config.latent_channels, config.window);
        store.insert(PHASE_WX, Tensor::zeros(&[n, t]))?;
        store.insert(PHASE_WY, Tensor::zeros(&[n, t]))?;
        store.insert(PHASE_BX, Tensor::zeros(&[n, 1]))?;
        store.insert(PHASE_BY, Tensor::zeros(&[n, 1]))?;
        let mut model = Self::assemble(config, store);
        for i in 0..n {
            model.set_phase_head(i, 1.0 / t as f64)?;
        }
        Ok(model)
    }

    pub fn config(&self) -> &PaeConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Points channel `channel`'s phase head at the analytic projection for
    /// `frequency`, with zero bias.
    pub fn set_phase_head(&mut self, channel: usize, frequency: f64) -> Result<(), PaeError> {
        let (n, t) = (self.config.latent_channels, self.config.window);
        if channel >= n {
            return Err(PaeError::Shape(format!("channel {channel} of {n}")));
        }
        let (wx, wy) = analytic_phase_weights(frequency, t);
        self.store.get_mut(PHASE_WX)?.data_mut()[channel * t..(channel + 1) * t].copy_from_slice(&wx);
        self.store.get_mut(PHASE_WY)?.data_mut()[channel * t..(channel + 1) * t].copy_from_slice(&wy);
        self.store.get_mut(PHASE_BX)?.data_mut()[channel] = 0.0;
        self.store.get_mut(PHASE_BY)?.data_mut()[channel] = 0.0;
        Ok(())
    }

    fn check_window(&self, rows: usize, cols: usize) -> Result<(), PaeError> {
        if rows != self.config.window || cols != self.config.input_channels {
            return Err(PaeError::Shape(format!(
                "window is {rows}×{cols}, model expects {}×{}",
                self.config.window, self.config.input_channels
            )));
        }
        Ok(())
    }

    /// `y = E_d(C)`: `T × C` to `T × N`.
    pub fn encode_graph(&self, g: &mut Graph, x: Var) -> Result<Var, PaeError> {
        let v = g.value(x);
        self.check_window(v.rows(), v.cols())?;
        let h = self.enc_in.forward(g, &self.store, x)?;
        let h = g.tanh(h)?;
        Ok(self.enc_out.forward(g, &self.store, h)?)
    }

    /// Returns `(params N×3, phase N×1, ŷ_p T×N)`.
    pub fn periodic_branch_graph(&self, g: &mut Graph, y: Var) -> Result<(Var, Var, Var), PaeError> {
        let t = g.value(y).rows();
        let params = g.fft_params(y)?;
        let yt = g.transpose(y)?;
        let mut head = |w: &str, b: &str| -> Result<Var, AutodiffError> {
            let w = g.param(&self.store, w)?;
            let b = g.param(&self.store, b)?;
            let p = g.mul(yt, w)?;
            let s = g.row_sums(p)?;
            g.add(s, b)
        };
        let sx = head(PHASE_WX, PHASE_BX)?;
        let sy = head(PHASE_WY, PHASE_BY)?;
        let phase = g.phase_cycles(sx, sy)?;
        let periodic = g.periodic_recon(params, phase, t)?;
        Ok((params, phase, periodic))
    }

    /// `ŷ_np = E_np(y)`, or `None` when the branch is disabled.
    pub fn nonperiodic_branch_graph(&self, g: &mut Graph, y: Var) -> Result<Option<Var>, PaeError> {
        if !self.config.nonperiodic_enabled {
            return Ok(None);
        }
        let h = self.np_in.forward(g, &self.store, y)?;
        let h = g.instance_norm(h, NORM_EPS)?;
        let h = g.tanh(h)?;
        Ok(Some(self.np_out.forward(g, &self.store, h)?))
    }

    /// `Ĉ = D_bh(ŷ_p + ŷ_np)`.
    pub fn decode_graph(&self, g: &mut Graph, periodic: Var, nonperiodic: Option<Var>) -> Result<(Var, Var), PaeError> {
        let input = match nonperiodic {
            Some(np) => g.add(periodic, np)?,
            None => periodic,
        };
        let out = self.dec.forward(g, &self.store, input)?;
        Ok((input, out))
    }

    pub fn forward_graph(&self, g: &mut Graph, x: Var) -> Result<PaeForward, PaeError> {
        let latent = self.encode_graph(g, x)?;
        let (params, phase, periodic) = self.periodic_branch_graph(g, latent)?;
        let nonperiodic = self.nonperiodic_branch_graph(g, latent)?;
        let (decoder_input, output) = self.decode_graph(g, periodic, nonperiodic)?;
        Ok(PaeForward {
            latent,
            params,
            phase,
            periodic,
            nonperiodic,
            decoder_input,
            output,
        })
    }

    pub fn encode(&self, window: &Matrix) -> Result<Matrix, PaeError> {
        let mut g = Graph::new();
        let x = g.constant(window.into());
        let y = self.encode_graph(&mut g, x)?;
        Ok(g.value(y).to_matrix())
    }

    /// Decodes plain `T × N` branch outputs.
    pub fn decode(&self, periodic: &Matrix, nonperiodic: Option<&Matrix>) -> Result<Matrix, PaeError> {
        let mut g = Graph::new();
        let p = g.constant(periodic.into());
        let np = nonperiodic.map(|m| g.constant(m.into()));
        if let Some(np) = np {
            if g.value(np).shape() != g.value(p).shape() {
                return Err(PaeError::Shape("branch outputs differ in shape".into()));
            }
        }
        let n = self.config.latent_channels;
        if periodic.cols() != n {
            return Err(PaeError::Shape(format!("decoder expects {n} channels, got {}", periodic.cols())));
        }
        let (_, out) = self.decode_graph(&mut g, p, np)?;
        Ok(g.value(out).to_matrix())
    }

    pub fn run(&self, window: &Matrix) -> Result<PaeOutput, PaeError> {
        let mut g = Graph::new();
        let x = g.constant(window.into());
        let f = self.forward_graph(&mut g, x)?;
        let pv = g.value(f.params);
        let sv = g.value(f.phase);
        let params = (0..self.config.latent_channels)
            .map(|i| PeriodicParams {
                amplitude: pv.get(i, 0),
                frequency: pv.get(i, 1),
                offset: pv.get(i, 2),
                phase_shift: sv.data()[i],
            })
            .collect();
        Ok(PaeOutput {
            latent: g.value(f.latent).to_matrix(),
            params,
            periodic: g.value(f.periodic).to_matrix(),
            nonperiodic: f.nonperiodic.map(|v| g.value(v).to_matrix()),
            reconstruction: g.value(f.output).to_matrix(),
        })
    }

    /// Reconstruction loss terms `(total, l1, velocity)` on one window.
    pub fn evaluate(&self, window: &Matrix) -> Result<(f64, f64, f64), PaeError> {
        let mut g = Graph::new();
        let x = g.constant(window.into());
        let f = self.forward_graph(&mut g, x)?;
        let l = loss_rec(&mut g, x, f.output, self.config.velocity_weight, 1.0 / self.config.fps)?;
        Ok((g.value(l.total).item(), g.value(l.l1).item(), g.value(l.velocity).item()))
    }

    pub fn save(&self) -> Vec<u8> {
        let mut meta: BTreeMap<String, String> = self.config.to_pairs();
        meta.insert("model".into(), "pae".into());
        write_checkpoint(&self.store, &meta)
    }

    pub fn load(bytes: &[u8]) -> Result<Self, PaeError> {
        let (store, meta) = read_checkpoint(bytes)?;
        if meta.get("model").map(String::as_str) != Some("pae") {
            return Err(PaeError::Config("checkpoint does not hold a periodic autoencoder".into()));
        }
        let config = PaeConfig::from_pairs(&meta)?;
        let model = Self::assemble(config, store);
        for layer in [&model.enc_in, &model.enc_out, &model.np_in, &model.np_out, &model.dec] {
            layer.check(&model.store)?;
        }
        let (n, t) = (model.config.latent_channels, model.config.window);
        for (name, shape) in [(PHASE_WX, [n, t]), (PHASE_WY, [n, t]), (PHASE_BX, [n, 1]), (PHASE_BY, [n, 1])] {
            if model.store.get(name)?.shape() != shape {
                return Err(PaeError::Shape(format!("checkpoint parameter `{name}` has the wrong shape")));
            }
        }
        Ok(model)
    }
}
