//! Periodic autoencoder: a convolutional encoder whose latent channels are
//! re-expressed as sinusoids (periodic branch), an optional non-periodic
//! residual branch, and a convolutional decoder.

mod config;
mod manifold;
mod model;
mod synthetic;
mod train;

pub use config::PaeConfig;
pub use manifold::{export_phase_manifold, pca_2d, phase_points, write_manifold_csv, PhaseManifold, PhaseManifoldSample};
pub use model::{analytic_phase_weights, loss_rec, PaeForward, PaeModel, PaeOutput, RecLoss};
pub use synthetic::{generate_synthetic, generate_synthetic_with, Burst, SourceTone, SyntheticConfig, SyntheticDataset};
pub use train::{mean_reconstruction_l1, train, train_with_progress, EpochStats, TrainLog};

use crate::autodiff::AutodiffError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PaeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
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
}
