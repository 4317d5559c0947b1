use super::MetricsError;
use crate::Matrix;

/// Mouth and jaw coefficients in the ARKit blendshape order: `jawOpen`
/// and `mouthClose` through `mouthUpperUpRight`.
pub const DEFAULT_LIP_INDICES: [usize; 24] = [
    17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33, 34, 35, 36, 37, 38, 39, 40,
];

/// `(LAD, FAD)`: mean squared error over the lip columns and over all
/// columns.
pub fn lad_fad(gt: &Matrix, pred: &Matrix, lip_indices: &[usize]) -> Result<(f64, f64), MetricsError> {
    if gt.rows() != pred.rows() || gt.cols() != pred.cols() {
        return Err(MetricsError::Shape(format!(
            "{}×{} vs {}×{}",
            gt.rows(),
            gt.cols(),
            pred.rows(),
            pred.cols()
        )));
    }
    if lip_indices.is_empty() {
        return Err(MetricsError::InvalidParameter("empty lip index set".into()));
    }
    if let Some(&bad) = lip_indices.iter().find(|&&i| i >= gt.cols()) {
        return Err(MetricsError::InvalidParameter(format!("lip index {bad} out of {}", gt.cols())));
    }
    if gt.rows() == 0 {
        return Err(MetricsError::TooFewSamples { needed: 1, got: 0 });
    }
    let sq = |r: usize, c: usize| (gt.get(r, c) - pred.get(r, c)).powi(2);
    let t = gt.rows();
    let lad: f64 = (0..t).flat_map(|r| lip_indices.iter().map(move |&c| (r, c))).map(|(r, c)| sq(r, c)).sum::<f64>()
        / (t * lip_indices.len()) as f64;
    let fad: f64 = (0..t).flat_map(|r| (0..gt.cols()).map(move |c| (r, c))).map(|(r, c)| sq(r, c)).sum::<f64>()
        / (t * gt.cols()) as f64;
    Ok((lad, fad))
}
