use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{PaeError, PaeModel};
use crate::spectrum::PeriodicParams;
use crate::Matrix;

/// Per-channel phase points of one window.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseManifoldSample {
    pub window: usize,
    /// `(A sin 2πS, A cos 2πS)` for each latent channel.
    pub points: Vec<[f64; 2]>,
    pub amplitudes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseManifold {
    pub samples: Vec<PhaseManifoldSample>,
    /// 2-D PCA projection of each window's stacked points, in window order.
    pub projection: Vec<[f64; 2]>,
    /// Set when the stacked vectors have no spread (e.g. a single window);
    /// the projection is then all zeros.
    pub degenerate: bool,
}

pub fn phase_points(params: &[PeriodicParams]) -> Vec<[f64; 2]> {
    params
        .iter()
        .map(|p| {
            let (s, c) = (2.0 * PI * p.phase_shift).sin_cos();
            [p.amplitude * s, p.amplitude * c]
        })
        .collect()
}

/// Projects row vectors onto their two leading principal axes.
///
/// Returns the projections and a flag set when the total variance is zero.
/// Axis signs are fixed so each axis's largest-magnitude component is
/// positive.
pub fn pca_2d(vectors: &[Vec<f64>]) -> Result<(Vec<[f64; 2]>, bool), PaeError> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(PaeError::EmptyDataset);
    }
    if vectors.iter().any(|v| v.len() != d) {
        return Err(PaeError::Shape("vectors differ in length".into()));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, d, |i, j| vectors[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / n as f64;
    let total: f64 = cov.diagonal().iter().sum();
    if n < 2 || total <= 1e-12 {
        return Ok((vec![[0.0, 0.0]; n], true));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axes: Vec<Vec<f64>> = order
        .iter()
        .take(2)
        .map(|&k| {
            let col: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let big = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            let sgn = if big < 0.0 { -1.0 } else { 1.0 };
            col.into_iter().map(|v| v * sgn).collect()
        })
        .collect();
    let proj = (0..n)
        .map(|i| {
            let row = centered.row(i);
            let mut p = [0.0; 2];
            for (k, axis) in axes.iter().enumerate() {
                p[k] = row.iter().zip(axis).map(|(a, b)| a * b).sum();
            }
            p
        })
        .collect();
    Ok((proj, false))
}

/// Runs the model over `dataset` and collects phase points and their PCA.
pub fn export_phase_manifold(model: &PaeModel, dataset: &[Matrix]) -> Result<PhaseManifold, PaeError> {
    if dataset.is_empty() {
        return Err(PaeError::EmptyDataset);
    }
    let mut samples = Vec::with_capacity(dataset.len());
    for (i, w) in dataset.iter().enumerate() {
        let out = model.run(w)?;
        samples.push(PhaseManifoldSample {
            window: i,
            points: phase_points(&out.params),
            amplitudes: out.params.iter().map(|p| p.amplitude).collect(),
        });
    }
    let stacked: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.points.iter().flat_map(|p| p.iter().copied()).collect())
        .collect();
    let (projection, degenerate) = pca_2d(&stacked)?;
    if degenerate {
        log::warn!("phase manifold has zero variance across {} window(s); PCA skipped", dataset.len());
    }
    Ok(PhaseManifold {
        samples,
        projection,
        degenerate,
    })
}

/// CSV rows `window, channel, x, y, pca_x, pca_y`.
pub fn write_manifold_csv<W: Write>(writer: W, manifold: &PhaseManifold) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["window", "channel", "x", "y", "pca_x", "pca_y"])?;
    for (s, p) in manifold.samples.iter().zip(&manifold.projection) {
        for (c, pt) in s.points.iter().enumerate() {
            w.write_record([
                s.window.to_string(),
                c.to_string(),
                pt[0].to_string(),
                pt[1].to_string(),
                p[0].to_string(),
                p[1].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
