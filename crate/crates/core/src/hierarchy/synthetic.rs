use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{one_hot_track, ConditioningSet, HierConfig, HierError, BODY_DIM, FACE_DIM, HAND_DIM};
use crate::pae::{generate_synthetic, SyntheticDataset};
use crate::Matrix;

/// Conditioning tracks paired with face, body and hand targets.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedDataset {
    /// Conditioning per window, with the ground-truth face track filled in.
    pub conditioning: Vec<ConditioningSet>,
    pub face: Vec<Matrix>,
    pub body: Vec<Matrix>,
    pub hand: Vec<Matrix>,
    /// The synthetic motion the targets were cut from; `None` for recorded data.
    pub motion: Option<SyntheticDataset>,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.conditioning.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditioning.is_empty()
    }

    /// Body and hand targets of window `i` side by side.
    pub fn body_hand(&self, i: usize) -> Matrix {
        Matrix::hconcat(&[&self.body[i], &self.hand[i]])
    }
}

fn mix(src: &Matrix, weights: &Matrix) -> Matrix {
    Matrix::from_fn(src.rows(), weights.cols(), |t, c| {
        (0..src.cols()).map(|s| src.get(t, s) * weights.get(s, c)).sum()
    })
}

/// Paired data whose conditioning is a low-dimensional function of the
/// target motion: the body and hand targets are synthetic motion windows,
/// and the audio, text and face tracks are fixed random mixes of the same
/// per-frame sources. Emotion and identity are per-window one-hot labels.
pub fn generate_paired(n: usize, config: &HierConfig, seed: u64) -> Result<PairedDataset, HierError> {
    if n == 0 {
        return Err(HierError::EmptyDataset);
    }
    let t = config.window;
    let motion = generate_synthetic(n, t, BODY_DIM + HAND_DIM, seed);
    let n_src = motion.config.sources.min((t / 2).saturating_sub(1).max(1)).max(1) + motion.config.burst_sources;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca11);
    let mut random = |cols: usize, scale: f64| Matrix::from_fn(n_src, cols, |_, _| scale * rng.gen_range(-1.0..1.0));
    let audio_mix = random(config.audio_dim, 1.0);
    let text_mix = random(config.text_dim, 0.5);
    let face_mix = random(FACE_DIM, 0.5);
    let speakers = config.identity_dim.min(4);
    let mut out = PairedDataset {
        conditioning: Vec::with_capacity(n),
        face: Vec::with_capacity(n),
        body: Vec::with_capacity(n),
        hand: Vec::with_capacity(n),
        motion: None,
    };
    for i in 0..n {
        let src = motion.source_tracks(i);
        let face_raw = mix(&src, &face_mix);
        let face = Matrix::from_fn(t, FACE_DIM, |r, c| 0.5 + 0.4 * face_raw.get(r, c).tanh());
        let window = &motion.windows[i];
        out.body.push(window.select_columns(&(0..BODY_DIM).collect::<Vec<_>>()));
        out.hand.push(window.select_columns(&(BODY_DIM..BODY_DIM + HAND_DIM).collect::<Vec<_>>()));
        let emotion = one_hot_track(t, config.emotion_dim, rng.gen_range(0..config.emotion_dim))?;
        let identity = one_hot_track(t, config.identity_dim, rng.gen_range(0..speakers))?;
        out.conditioning.push(ConditioningSet {
            audio: mix(&src, &audio_mix),
            face: Some(face.clone()),
            text: (config.text_dim > 0).then(|| mix(&src, &text_mix)),
            emotion,
            identity,
        });
        out.face.push(face);
    }
    out.motion = Some(motion);
    Ok(out)
}
