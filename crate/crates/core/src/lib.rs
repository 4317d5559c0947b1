//! Periodicity disentanglement of skeletal motion, a hierarchical co-speech
//! gesture cascade, and gesture evaluation metrics.

pub mod matrix;
pub mod spectrum;

pub use matrix::Matrix;
pub mod audio_io;
pub mod autodiff;
pub mod hierarchy;
pub mod motion_io;
pub mod metrics;
pub mod pae;
