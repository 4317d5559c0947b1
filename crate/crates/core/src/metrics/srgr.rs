use super::MetricsError;
use crate::motion_io::JointPositions;

fn check_pair(gt: &JointPositions, pred: &JointPositions) -> Result<(), MetricsError> {
    if gt.frame_count() != pred.frame_count() || gt.joint_count() != pred.joint_count() {
        return Err(MetricsError::Shape(format!(
            "ground truth {}×{} vs prediction {}×{}",
            gt.frame_count(),
            gt.joint_count(),
            pred.frame_count(),
            pred.joint_count()
        )));
    }
    Ok(())
}

/// Fraction of joint-frames whose prediction lies strictly within `sigma`
/// of the ground truth.
pub fn pck(gt: &JointPositions, pred: &JointPositions, sigma: f64) -> Result<f64, MetricsError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MetricsError::InvalidParameter(format!("sigma {sigma} must be positive")));
    }
    check_pair(gt, pred)?;
    let (t, j) = (gt.frame_count(), gt.joint_count());
    let mut hits = 0usize;
    for f in 0..t {
        for k in 0..j {
            let (a, b) = (gt.get(f, k), pred.get(f, k));
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            if d < sigma {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / (t * j) as f64)
}

/// Weighted mean of per-clip [`pck`]. `weights` default to uniform and are
/// normalized to sum to one.
pub fn srgr(
    gt: &[JointPositions],
    pred: &[JointPositions],
    sigma: f64,
    weights: Option<&[f64]>,
) -> Result<f64, MetricsError> {
    if gt.len() != pred.len() {
        return Err(MetricsError::Shape(format!("{} ground-truth clips, {} predicted", gt.len(), pred.len())));
    }
    if gt.is_empty() {
        return Err(MetricsError::TooFewSamples { needed: 1, got: 0 });
    }
    let uniform = vec![1.0; gt.len()];
    let w = weights.unwrap_or(&uniform);
    if w.len() != gt.len() {
        return Err(MetricsError::Shape(format!("{} weights for {} clips", w.len(), gt.len())));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(MetricsError::InvalidParameter("clip weights must be finite and non-negative".into()));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(MetricsError::InvalidParameter("clip weights are all zero".into()));
    }
    let mut acc = 0.0;
    for ((g, p), wi) in gt.iter().zip(pred).zip(w) {
        acc += wi * pck(g, p, sigma)?;
    }
    Ok(acc / total)
}
