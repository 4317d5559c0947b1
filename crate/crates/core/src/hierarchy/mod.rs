//! Hierarchical gesture generator: a face decoder, a recurrent fusion of the
//! conditioning tracks, cascaded body then hand decoders, and a mixture of
//! experts that adds a periodic element on top of the cascade.

mod conditioning;
mod config;
mod loss;
mod model;
mod synthetic;
mod train;

pub use conditioning::{one_hot_track, ConditioningSet};
pub use config::HierConfig;
pub use loss::{loss_face, loss_gesture, loss_total, param_loss, pseudo_params, PseudoParams, TotalLoss};
pub use model::{blend_experts, Generated, GeneratorForward, GeneratorModel, MoeForward, PredictedParams};
pub use synthetic::{generate_paired, PairedDataset};
pub use train::{evaluate_generator, train_generator, train_generator_with_progress, HierEpochStats, HierTrainLog};

use crate::autodiff::AutodiffError;
use crate::pae::PaeError;

/// Blendshape coefficients per frame.
pub const FACE_DIM: usize = 52;
/// Body channels per frame.
pub const BODY_DIM: usize = 27;
/// Hand channels per frame.
pub const HAND_DIM: usize = 114;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum HierError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("missing {0} track")]
    MissingTrack(&'static str),
    #[error("hand decoding needs the body track")]
    MissingBody,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("window {0} contains non-finite values")]
    NonFiniteInput(usize),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("optimizer failed at epoch {epoch}, batch {batch}: {source}")]
    Optimizer {
        epoch: usize,
        batch: usize,
        source: AutodiffError,
    },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Pae(#[from] PaeError),
}
