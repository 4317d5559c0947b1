use super::{HierError, PredictedParams};
use crate::autodiff::{AutodiffError, Graph, Tensor, Var};
use crate::pae::{loss_rec, PaeModel, RecLoss};
use crate::spectrum::extract_params;
use crate::Matrix;

/// `ω_mse · MSE + ω_vel · L1` of frame-to-frame differences.
pub fn loss_face(g: &mut Graph, target: Var, pred: Var, mse_weight: f64, vel_weight: f64) -> Result<Var, AutodiffError> {
    let mse = g.mse(pred, target)?;
    let vel = g.velocity_l1(pred, target, 1.0)?;
    let a = g.scale(mse, mse_weight)?;
    let b = g.scale(vel, vel_weight)?;
    g.add(a, b)
}

/// Reconstruction plus velocity loss over the body and hand tracks together.
pub fn loss_gesture(
    g: &mut Graph,
    body_target: Var,
    hand_target: Var,
    body: Var,
    hand: Var,
    velocity_weight: f64,
    dt: f64,
) -> Result<RecLoss, AutodiffError> {
    let target = g.concat_cols(&[body_target, hand_target])?;
    let pred = g.concat_cols(&[body, hand])?;
    loss_rec(g, target, pred, velocity_weight, dt)
}

/// Per-channel periodic parameters of a ground-truth window's latent, used
/// as regression targets for the enhancer.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoParams {
    pub amplitude: Vec<f64>,
    pub frequency: Vec<f64>,
    pub offset: Vec<f64>,
    pub phase: Vec<f64>,
    /// False for channels with no non-DC power; they carry no phase and
    /// are left out of the matching term.
    pub valid: Vec<bool>,
}

impl PseudoParams {
    pub fn channels(&self) -> usize {
        self.valid.len()
    }

    /// Extracts the parameters of each column of a `T × N` latent.
    pub fn from_latent(latent: &Matrix) -> Result<Self, HierError> {
        let n = latent.cols();
        let mut p = PseudoParams {
            amplitude: Vec::with_capacity(n),
            frequency: Vec::with_capacity(n),
            offset: Vec::with_capacity(n),
            phase: Vec::with_capacity(n),
            valid: Vec::with_capacity(n),
        };
        for c in 0..n {
            let e = extract_params(&latent.column(c)).map_err(|e| HierError::Shape(e.to_string()))?;
            p.amplitude.push(e.amplitude);
            p.frequency.push(e.frequency);
            p.offset.push(e.offset);
            p.phase.push(e.phase_shift);
            p.valid.push(e.frequency > 0.0);
        }
        Ok(p)
    }
}

/// Pseudo labels for one `T × (27 + 114)` body-and-hand window.
pub fn pseudo_params(pae: &PaeModel, body_hand: &Matrix) -> Result<PseudoParams, HierError> {
    let latent = pae.encode(body_hand)?;
    PseudoParams::from_latent(&latent)
}

/// Squared error between every frame's prediction and the window's pseudo
/// labels, averaged over frames and valid channels and summed over
/// `A, F, B, S`. The phase error is the wrapped circular difference.
pub fn param_loss(g: &mut Graph, pred: &PredictedParams, target: &PseudoParams) -> Result<Var, AutodiffError> {
    let (t, n) = {
        let v = g.value(pred.amplitude);
        (v.rows(), v.cols())
    };
    if target.channels() != n {
        return Err(AutodiffError::Shape(format!(
            "{} pseudo channels for {n} predicted",
            target.channels()
        )));
    }
    let valid = target.valid.iter().filter(|&&v| v).count();
    if valid == 0 {
        return Ok(g.constant(Tensor::scalar(0.0)));
    }
    let mask = g.constant(Tensor::from_fn(t, n, |_, c| if target.valid[c] { 1.0 } else { 0.0 }));
    let rows = |v: &[f64]| Tensor::from_fn(t, n, |_, c| if target.valid[c] { v[c] } else { 0.0 });
    let norm = 1.0 / (t * valid) as f64;
    let mut terms = Vec::with_capacity(4);
    for (i, (p, z)) in [
        (pred.amplitude, &target.amplitude),
        (pred.frequency, &target.frequency),
        (pred.offset, &target.offset),
        (pred.phase, &target.phase),
    ]
    .into_iter()
    .enumerate()
    {
        let zt = g.constant(rows(z));
        let d = if i == 3 { g.circular_diff(p, zt)? } else { g.sub(p, zt)? };
        let d = g.mul(d, mask)?;
        let sq = g.mul(d, d)?;
        let s = g.sum_all(sq)?;
        terms.push(g.scale(s, norm)?);
    }
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t)?;
    }
    Ok(acc)
}

/// Scalar nodes of [`loss_total`].
#[derive(Clone, Copy, Debug)]
pub struct TotalLoss {
    pub total: Var,
    pub gesture: Var,
    pub param: Option<Var>,
}

/// Gesture reconstruction loss plus the weighted parameter-matching term
/// (absent when there is no enhancer prediction).
pub fn loss_total(
    g: &mut Graph,
    gesture: Var,
    pred: Option<&PredictedParams>,
    target: &PseudoParams,
    param_weight: f64,
) -> Result<TotalLoss, AutodiffError> {
    let param = match pred {
        Some(p) => Some(param_loss(g, p, target)?),
        None => None,
    };
    let total = match param {
        Some(p) => {
            let w = g.scale(p, param_weight)?;
            g.add(gesture, w)?
        }
        None => gesture,
    };
    Ok(TotalLoss { total, gesture, param })
}
