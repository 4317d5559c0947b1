use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Matrix;

/// Generation settings for [`generate_synthetic_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub windows: usize,
    pub window: usize,
    pub channels: usize,
    /// Sinusoidal sources shared by all channels of a window.
    pub sources: usize,
    /// Impulse-burst sources shared by all channels of a window.
    pub burst_sources: usize,
    /// Probability that a burst source fires in a given window.
    pub burst_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            windows: 64,
            window: 34,
            channels: 141,
            sources: 3,
            burst_sources: 2,
            burst_prob: 0.5,
            seed: 0,
        }
    }
}

/// One sinusoidal source of one window.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTone {
    /// DFT bin, so the frequency is `bin / T` cycles per frame.
    pub bin: usize,
    pub amplitude: f64,
    /// Phase shift in cycles.
    pub phase: f64,
}

/// One impulse burst (Gaussian bump) of one window.
#[derive(Clone, Debug, PartialEq)]
pub struct Burst {
    pub source: usize,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

/// Windows with their known periodic / non-periodic split.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub windows: Vec<Matrix>,
    /// Per-channel offsets plus mixed sinusoids.
    pub periodic: Vec<Matrix>,
    /// Mixed bursts; `windows[i] = periodic[i] + nonperiodic[i]`.
    pub nonperiodic: Vec<Matrix>,
    pub tones: Vec<Vec<SourceTone>>,
    pub bursts: Vec<Vec<Burst>>,
    /// `channels × sources` weights; each channel uses 1 to 3 sources.
    pub mixing: Matrix,
    /// `channels × burst_sources` weights.
    pub burst_mixing: Matrix,
    pub offsets: Vec<f64>,
}

impl SyntheticDataset {
    /// `T × (sources + burst_sources)` source signals of window `index`:
    /// the sinusoids first, then the burst tracks.
    pub fn source_tracks(&self, index: usize) -> Matrix {
        let t_len = self.config.window;
        let tones = &self.tones[index];
        let nb = self.config.burst_sources;
        let mut m = Matrix::zeros(t_len, tones.len() + nb);
        for (s, tone) in tones.iter().enumerate() {
            let f = tone.bin as f64 / t_len as f64;
            for t in 0..t_len {
                m.set(t, s, tone.amplitude * (2.0 * PI * (f * t as f64 - tone.phase)).sin());
            }
        }
        for b in &self.bursts[index] {
            let col = tones.len() + b.source;
            for t in 0..t_len {
                let z = (t as f64 - b.center) / b.width;
                m.set(t, col, m.get(t, col) + b.amplitude * (-0.5 * z * z).exp());
            }
        }
        m
    }
}

/// Desk-scale stand-in for motion windows: `n` windows of `T × channels`,
/// using the default source counts and burst probability.
pub fn generate_synthetic(n: usize, window: usize, channels: usize, seed: u64) -> SyntheticDataset {
    generate_synthetic_with(&SyntheticConfig {
        windows: n,
        window,
        channels,
        seed,
        ..SyntheticConfig::default()
    })
}

/// Each channel is a fixed mix of 1 to 3 of the window's sinusoidal sources
/// (distinct bins in `1..T/2`) plus an offset, so with no bursts every
/// channel holds at most three non-DC bins. Bursts are Gaussian bumps mixed
/// into all channels through a second fixed matrix.
pub fn generate_synthetic_with(cfg: &SyntheticConfig) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (t_len, ch) = (cfg.window, cfg.channels);
    let max_bin = (t_len / 2).saturating_sub(1).max(1);
    let n_src = cfg.sources.min(max_bin).max(1);

    let mut mixing = Matrix::zeros(ch, n_src);
    for c in 0..ch {
        let used = rng.gen_range(1..=n_src.min(3));
        for s in sample(&mut rng, n_src, used) {
            let w = rng.gen_range(0.3..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            mixing.set(c, s, w);
        }
    }
    let burst_mixing = Matrix::from_fn(ch, cfg.burst_sources, |_, _| rng.gen_range(-1.0..1.0));
    let offsets: Vec<f64> = (0..ch).map(|_| rng.gen_range(-0.25..0.25)).collect();

    let mut out = SyntheticDataset {
        config: cfg.clone(),
        windows: Vec::with_capacity(cfg.windows),
        periodic: Vec::with_capacity(cfg.windows),
        nonperiodic: Vec::with_capacity(cfg.windows),
        tones: Vec::with_capacity(cfg.windows),
        bursts: Vec::with_capacity(cfg.windows),
        mixing,
        burst_mixing,
        offsets,
    };
    for _ in 0..cfg.windows {
        let bins = sample(&mut rng, max_bin, n_src);
        let tones: Vec<SourceTone> = bins
            .iter()
            .map(|b| SourceTone {
                bin: b + 1,
                amplitude: rng.gen_range(0.5..1.5),
                phase: rng.gen_range(0.0..1.0),
            })
            .collect();
        let mut bursts = Vec::new();
        for s in 0..cfg.burst_sources {
            if rng.gen_bool(cfg.burst_prob.clamp(0.0, 1.0)) {
                bursts.push(Burst {
                    source: s,
                    center: rng.gen_range(0.0..(t_len as f64 - 1.0)),
                    width: rng.gen_range(1.0..2.5),
                    amplitude: rng.gen_range(1.0..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                });
            }
        }
        let src: Vec<Vec<f64>> = tones
            .iter()
            .map(|tone| {
                let f = tone.bin as f64 / t_len as f64;
                (0..t_len)
                    .map(|t| tone.amplitude * (2.0 * PI * (f * t as f64 - tone.phase)).sin())
                    .collect()
            })
            .collect();
        let mut burst_src = vec![vec![0.0; t_len]; cfg.burst_sources];
        for b in &bursts {
            for (t, v) in burst_src[b.source].iter_mut().enumerate() {
                let z = (t as f64 - b.center) / b.width;
                *v += b.amplitude * (-0.5 * z * z).exp();
            }
        }
        let periodic = Matrix::from_fn(t_len, ch, |t, c| {
            out.offsets[c] + (0..n_src).map(|s| out.mixing.get(c, s) * src[s][t]).sum::<f64>()
        });
        let nonperiodic = Matrix::from_fn(t_len, ch, |t, c| {
            (0..cfg.burst_sources)
                .map(|s| out.burst_mixing.get(c, s) * burst_src[s][t])
                .sum::<f64>()
        });
        let window = Matrix::from_fn(t_len, ch, |t, c| periodic.get(t, c) + nonperiodic.get(t, c));
        out.windows.push(window);
        out.periodic.push(periodic);
        out.nonperiodic.push(nonperiodic);
        out.tones.push(tones);
        out.bursts.push(bursts);
    }
    out
}
