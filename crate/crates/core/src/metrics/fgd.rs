use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FeatureSet, MetricsError};

/// Eigenvalues down to this are treated as roundoff and clamped to zero.
const EIGEN_TOLERANCE: f64 = 1e-6;

/// Mean and sample covariance of a feature set.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    /// Fits `n × d` row vectors; needs `n ≥ 2`. Uses the `n - 1` covariance.
    pub fn fit(features: &FeatureSet) -> Result<Self, MetricsError> {
        let m = &features.vectors;
        let (n, d) = (m.rows(), m.cols());
        if n < 2 {
            return Err(MetricsError::TooFewSamples { needed: 2, got: n });
        }
        if n < d {
            log::warn!("fitting a {d}-dimensional Gaussian to {n} samples; covariance is rank-deficient");
        }
        let x = DMatrix::from_row_slice(n, d, m.as_slice());
        let mean = DVector::from_fn(d, |j, _| x.column(j).mean());
        let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
        let mut cov = centered.transpose() * &centered / (n - 1) as f64;
        cov = (&cov + cov.transpose()) * 0.5;
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite("covariance".into()));
        }
        Ok(Self { mean, cov })
    }
}

fn clamped_eigenvalues(m: DMatrix<f64>, what: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, MetricsError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(what.into()));
    }
    let mut eig = SymmetricEigen::new(m);
    for v in eig.eigenvalues.iter_mut() {
        if *v < -EIGEN_TOLERANCE {
            return Err(MetricsError::NegativeEigenvalue(*v));
        }
        *v = v.max(0.0);
    }
    Ok(eig)
}

/// `‖μ1 − μ2‖² + tr(Σ1 + Σ2 − 2 (Σ1 Σ2)^{1/2})`, with the trace of the
/// square root taken from the eigenvalues of `Σ1^{1/2} Σ2 Σ1^{1/2}`.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64, MetricsError> {
    if a.mean.len() != b.mean.len() {
        return Err(MetricsError::Shape(format!(
            "feature widths {} and {}",
            a.mean.len(),
            b.mean.len()
        )));
    }
    let e1 = clamped_eigenvalues(a.cov.clone(), "first covariance")?;
    let root1 = &e1.eigenvectors
        * DMatrix::from_diagonal(&e1.eigenvalues.map(f64::sqrt))
        * e1.eigenvectors.transpose();
    let mut inner = &root1 * &b.cov * &root1;
    inner = (&inner + inner.transpose()) * 0.5;
    let e2 = clamped_eigenvalues(inner, "covariance product")?;
    let tr_root: f64 = e2.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let diff = &a.mean - &b.mean;
    let d = diff.norm_squared() + a.cov.trace() + b.cov.trace() - 2.0 * tr_root;
    Ok(d.max(0.0))
}

/// Fréchet gesture distance between two feature sets.
pub fn fgd(generated: &FeatureSet, ground_truth: &FeatureSet) -> Result<f64, MetricsError> {
    if generated.dim() != ground_truth.dim() {
        return Err(MetricsError::Shape(format!(
            "feature widths {} and {}",
            generated.dim(),
            ground_truth.dim()
        )));
    }
    frechet_distance(&GaussianStats::fit(generated)?, &GaussianStats::fit(ground_truth)?)
}
