use std::f64::consts::PI;

use super::{AudioBuffer, AudioError, BeatList};
use crate::spectrum::{dft_real, SpectrumFrame};
use crate::Matrix;

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Hann-windowed short-time spectra; frame `i` starts at sample `i * hop`.
pub fn stft(
    buffer: &AudioBuffer,
    frame_len: usize,
    hop: usize,
) -> Result<Vec<SpectrumFrame>, AudioError> {
    if frame_len < 2 || !frame_len.is_power_of_two() {
        return Err(AudioError::InvalidParameter(format!(
            "frame length {frame_len} must be a power of two"
        )));
    }
    if hop == 0 {
        return Err(AudioError::InvalidParameter("hop must be at least 1".into()));
    }
    let samples = buffer.samples();
    if samples.len() < frame_len {
        return Err(AudioError::TooShort {
            needed: frame_len,
            got: samples.len(),
        });
    }
    let window = hann(frame_len);
    let count = (samples.len() - frame_len) / hop + 1;
    let mut frame = vec![0.0; frame_len];
    (0..count)
        .map(|i| {
            let start = i * hop;
            for (k, f) in frame.iter_mut().enumerate() {
                *f = samples[start + k] * window[k];
            }
            Ok(dft_real(&frame).expect("power-of-two length"))
        })
        .collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters evaluated at the bin centre frequencies,
/// `n_mels × bins`.
pub fn mel_filterbank(
    n_mels: usize,
    bins: usize,
    frame_len: usize,
    sample_rate: f64,
) -> Result<Matrix, AudioError> {
    if n_mels == 0 {
        return Err(AudioError::InvalidParameter("n_mels must be at least 1".into()));
    }
    let top = hz_to_mel(sample_rate / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bank = Matrix::from_fn(n_mels, bins, |m, k| {
        let f = k as f64 * sample_rate / frame_len as f64;
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        ((f - lo) / (mid - lo)).min((hi - f) / (hi - mid)).max(0.0)
    });
    for m in 0..n_mels {
        if bank.row(m).iter().all(|&w| w == 0.0) {
            return Err(AudioError::InvalidParameter(format!(
                "{n_mels} mel bands exceed the {bins} usable bins (band {m} is empty)"
            )));
        }
    }
    Ok(bank)
}

/// Mel-band power before log compression, `frames × n_mels`.
pub fn mel_energies(
    spectra: &[SpectrumFrame],
    n_mels: usize,
    sample_rate: f64,
) -> Result<Matrix, AudioError> {
    let first = spectra
        .first()
        .ok_or_else(|| AudioError::InvalidParameter("no spectra".into()))?;
    let bins = first.coeffs().len();
    let bank = mel_filterbank(n_mels, bins, first.len(), sample_rate)?;
    Ok(Matrix::from_fn(spectra.len(), n_mels, |t, m| {
        spectra[t]
            .coeffs()
            .iter()
            .zip(bank.row(m))
            .map(|(q, w)| w * q.norm_sqr())
            .sum()
    }))
}

/// `ln(1 + mel power)` per frame and band.
pub fn log_mel(
    spectra: &[SpectrumFrame],
    n_mels: usize,
    sample_rate: f64,
) -> Result<Matrix, AudioError> {
    let mut m = mel_energies(spectra, n_mels, sample_rate)?;
    for v in m.as_mut_slice() {
        *v = v.ln_1p();
    }
    Ok(m)
}

/// Spectral flux: summed positive magnitude increase over the previous frame.
pub fn onset_envelope(spectra: &[SpectrumFrame]) -> Result<Vec<f64>, AudioError> {
    if spectra.len() < 2 {
        return Err(AudioError::TooShort {
            needed: 2,
            got: spectra.len(),
        });
    }
    let mut env = vec![0.0; spectra.len()];
    for t in 1..spectra.len() {
        env[t] = spectra[t]
            .coeffs()
            .iter()
            .zip(spectra[t - 1].coeffs())
            .map(|(a, b)| (a.norm() - b.norm()).max(0.0))
            .sum();
    }
    Ok(env)
}

/// Local envelope maxima reaching `threshold_ratio` of the global maximum.
///
/// A frame is a peak when it rises strictly above its left neighbour and is
/// not exceeded by its right neighbour, so a flat top yields its first frame.
pub fn pick_beats(
    envelope: &[f64],
    hop_seconds: f64,
    threshold_ratio: f64,
) -> Result<BeatList, AudioError> {
    if envelope.is_empty() {
        return Err(AudioError::InvalidParameter("empty envelope".into()));
    }
    if !(threshold_ratio > 0.0 && threshold_ratio <= 1.0) {
        return Err(AudioError::InvalidParameter(format!(
            "threshold ratio {threshold_ratio} outside (0, 1]"
        )));
    }
    if !(hop_seconds > 0.0 && hop_seconds.is_finite()) {
        return Err(AudioError::InvalidParameter(format!("hop {hop_seconds} s")));
    }
    let max = envelope.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return BeatList::new(Vec::new());
    }
    let threshold = threshold_ratio * max;
    let n = envelope.len();
    let times = (0..n)
        .filter(|&t| {
            let v = envelope[t];
            let left = if t == 0 { f64::NEG_INFINITY } else { envelope[t - 1] };
            let right = if t + 1 == n { f64::NEG_INFINITY } else { envelope[t + 1] };
            v >= threshold && v > left && v >= right
        })
        .map(|t| t as f64 * hop_seconds)
        .collect();
    BeatList::new(times)
}
