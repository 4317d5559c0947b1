//! Tape-based reverse-mode differentiation over `f64` tensors, with the
//! layers, losses, optimizer and checkpoint format used for training.

mod checkpoint;
pub mod gradcheck;
mod graph;
mod layers;
mod params;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use graph::{ConvSpec, Graph, Var};
pub use layers::{Conv1d, Dense, GruCell};
pub use params::{adam_update, uniform_init, AdamConfig, ParamStore, DEFAULT_LEARNING_RATE};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("backward target must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` registered twice")]
    DuplicateParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
