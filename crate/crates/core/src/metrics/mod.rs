//! Gesture evaluation: Fréchet gesture distance, keypoint recall, beat
//! alignment, diversity and facial errors.

mod beats;
mod face;
mod features;
mod fgd;
mod report;
mod srgr;

pub use beats::{beat_align, gesture_beats, joint_speed, smooth3, speed_minima};
pub use face::{lad_fad, DEFAULT_LIP_INDICES};
pub use features::{diversity, pae_features, FeatureSet, FeatureSource, PAE_FEATURE_EXTRACTOR};
pub use fgd::{fgd, frechet_distance, GaussianStats};
pub use report::{MetricParameters, MetricReport};
pub use srgr::{pck, srgr};

/// Default keypoint-recall threshold in centimeters.
pub const DEFAULT_SIGMA_CM: f64 = 3.0;
/// Default beat-alignment tolerance in seconds.
pub const DEFAULT_TAU_S: f64 = 0.1;
/// Default number of random pairs for [`diversity`].
pub const DEFAULT_DIVERSITY_PAIRS: usize = 1000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("covariance product has eigenvalue {0}, below the tolerance")]
    NegativeEigenvalue(f64),
    #[error("no reference beats")]
    EmptyBeats,
    #[error("csv: {0}")]
    Csv(String),
}
