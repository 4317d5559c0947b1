//! WAV ingestion, short-time spectra, log-mel tracks, onset envelopes and
//! audio beat lists.

mod csv_io;
mod features;
mod wav;

pub use csv_io::{read_beats_csv, read_feature_csv, write_beats_csv, write_feature_csv};
pub use features::{hann, log_mel, mel_energies, mel_filterbank, onset_envelope, pick_beats, stft};
pub use wav::{parse_wav, write_wav};

pub const DEFAULT_FRAME_LEN: usize = 1024;
pub const DEFAULT_HOP: usize = 512;
pub const DEFAULT_SAMPLE_RATE: f64 = 16000.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AudioError {
    #[error("malformed WAV: {0}")]
    Wav(String),
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),
    #[error("need at least {needed} samples or frames, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("beat times must be finite, non-negative and strictly increasing (index {0})")]
    InvalidBeats(usize),
    #[error("CSV: {0}")]
    Csv(String),
}

/// Mono samples in `[-1, 1]` at a fixed sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self, AudioError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(AudioError::InvalidBuffer(format!("sample rate {sample_rate}")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidBuffer(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Strictly increasing, non-negative beat times in seconds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BeatList {
    times: Vec<f64>,
}

impl BeatList {
    pub fn new(times: Vec<f64>) -> Result<Self, AudioError> {
        for (i, &t) in times.iter().enumerate() {
            let ordered = i == 0 || t > times[i - 1];
            if !(t.is_finite() && t >= 0.0 && ordered) {
                return Err(AudioError::InvalidBeats(i));
            }
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
