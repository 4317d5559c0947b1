//! Real DFT, power spectra and the closed-form sinusoid parameterization of a
//! single channel: amplitude, frequency, offset and phase shift.
//!
//! Frequencies are in cycles per frame and phase shifts in cycles, so a
//! channel is reconstructed as `A * sin(2π (F t - S)) + B` for `t = 0..T`.

mod decompose;
mod dft;
mod params;

pub use decompose::{decompose_topk, BasisDecomposition};
pub use dft::{dft_real, fft, power_spectrum, PowerSpectrum, SpectrumFrame};
pub use params::{
    circular_distance, extract_params, is_degenerate_power, phase_shift, reconstruct_periodic,
    wrap_unit, PeriodicParams,
};

pub use num_complex::Complex64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpectrumError {
    #[error("signal length {0} must be even and at least 2")]
    InvalidLength(usize),
}
