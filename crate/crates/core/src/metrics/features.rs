use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::MetricsError;
use crate::audio_io::{read_feature_csv, write_feature_csv};
use crate::pae::PaeModel;
use crate::Matrix;

/// Extractor id stamped into reports for [`pae_features`].
pub const PAE_FEATURE_EXTRACTOR: &str = "pae-mean-latent";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    Generated,
    GroundTruth,
}

/// `n × d` motion feature vectors, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub vectors: Matrix,
    pub source: FeatureSource,
}

impl FeatureSet {
    pub fn new(vectors: Matrix, source: FeatureSource) -> Result<Self, MetricsError> {
        if !vectors.is_finite() {
            return Err(MetricsError::NonFinite("feature vectors".into()));
        }
        Ok(Self { vectors, source })
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn read_csv<R: Read>(reader: R, source: FeatureSource) -> Result<Self, MetricsError> {
        let m = read_feature_csv(reader).map_err(|e| MetricsError::Csv(e.to_string()))?;
        Self::new(m, source)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MetricsError> {
        write_feature_csv(writer, &self.vectors).map_err(|e| MetricsError::Csv(e.to_string()))
    }
}

/// One feature vector per window: the PAE latent averaged over frames.
pub fn pae_features(pae: &PaeModel, windows: &[Matrix], source: FeatureSource) -> Result<FeatureSet, MetricsError> {
    let mut rows = Vec::with_capacity(windows.len());
    for w in windows {
        let z = pae.encode(w).map_err(|e| MetricsError::Shape(e.to_string()))?;
        let t = z.rows() as f64;
        rows.push((0..z.cols()).map(|c| z.column(c).iter().sum::<f64>() / t).collect::<Vec<_>>());
    }
    FeatureSet::new(Matrix::from_rows(&rows), source)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Mean L1 distance between feature vectors over `pairs` seeded random
/// distinct index pairs, or over every pair when `pairs` is zero.
pub fn diversity(features: &FeatureSet, pairs: usize, seed: u64) -> Result<f64, MetricsError> {
    let n = features.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { needed: 2, got: n });
    }
    let v = &features.vectors;
    if pairs == 0 {
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += l1(v.row(i), v.row(j));
            }
        }
        return Ok(sum / (n * (n - 1) / 2) as f64);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..pairs {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        sum += l1(v.row(i), v.row(j));
    }
    Ok(sum / pairs as f64)
}
