use std::f64::consts::PI;

use num_complex::Complex64;

use super::{dft_real, power_spectrum, SpectrumError};

/// Sinusoid parameters of one channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicParams {
    /// Amplitude `A >= 0`, in signal units.
    pub amplitude: f64,
    /// Power-weighted mean frequency `F`, in cycles per frame, within `[0, 0.5]`.
    pub frequency: f64,
    /// Offset `B` (the signal mean).
    pub offset: f64,
    /// Phase shift `S` in cycles, within `[0, 1)`.
    pub phase_shift: f64,
}

impl PeriodicParams {
    pub const ZERO: PeriodicParams = PeriodicParams {
        amplitude: 0.0,
        frequency: 0.0,
        offset: 0.0,
        phase_shift: 0.0,
    };
}

/// True when the non-DC power is numerically zero relative to the signal energy.
///
/// Such channels have no defined frequency or phase; both are reported as 0.
pub fn is_degenerate_power(total_power: f64, signal_energy: f64) -> bool {
    total_power <= 1e-20 * signal_energy.max(1e-300)
}

/// Wraps a value in cycles into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let s = x.rem_euclid(1.0);
    if s >= 1.0 {
        0.0
    } else {
        s
    }
}

/// Shortest signed distance between two phases in cycles, within `[-0.5, 0.5]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

/// Closed-form amplitude, frequency, offset and phase shift of one channel.
pub fn extract_params(signal: &[f64]) -> Result<PeriodicParams, SpectrumError> {
    let frame = dft_real(signal)?;
    let t = signal.len() as f64;
    let power = power_spectrum(&frame);
    let total = power.total();
    let energy: f64 = signal.iter().map(|v| v * v).sum();
    let amplitude = (2.0 / t * total).sqrt();
    if is_degenerate_power(total, energy) {
        return Ok(PeriodicParams {
            amplitude,
            frequency: 0.0,
            offset: power.dc,
            phase_shift: 0.0,
        });
    }
    // alpha_j = j / T for bins j = 1..=K.
    let weighted: f64 = power
        .values
        .iter()
        .enumerate()
        .map(|(i, p)| (i + 1) as f64 / t * p)
        .sum();
    let frequency = weighted / total;
    Ok(PeriodicParams {
        amplitude,
        frequency,
        offset: power.dc,
        phase_shift: phase_shift(signal, frequency),
    })
}

/// Phase (in cycles) of the best-fitting `sin(2π (F t - S))` at frequency `F`.
///
/// Projects the mean-removed signal onto `exp(-i 2π F t)`; with
/// `a = Σ y' sin(2πFt)` and `b = Σ y' cos(2πFt)` the projection is
/// `c = b - i a`, and the correlation `a cos θ - b sin θ` peaks at
/// `θ = atan2(-b, a)`.
pub fn phase_shift(signal: &[f64], frequency: f64) -> f64 {
    if frequency == 0.0 || signal.is_empty() {
        return 0.0;
    }
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let c: Complex64 = signal
        .iter()
        .enumerate()
        .map(|(t, &y)| (y - mean) * Complex64::from_polar(1.0, -2.0 * PI * frequency * t as f64))
        .sum();
    if c.norm_sqr() == 0.0 {
        return 0.0;
    }
    wrap_unit((-c.re).atan2(-c.im) / (2.0 * PI))
}

/// `y[t] = A sin(2π (F t - S)) + B` for `t = 0..len`.
pub fn reconstruct_periodic(params: &PeriodicParams, len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| {
            params.amplitude
                * (2.0 * PI * (params.frequency * t as f64 - params.phase_shift)).sin()
                + params.offset
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(a: f64, bin: usize, t_len: usize, s: f64, b: f64) -> Vec<f64> {
        let f = bin as f64 / t_len as f64;
        (0..t_len)
            .map(|t| a * (2.0 * PI * (f * t as f64 - s)).sin() + b)
            .collect()
    }

    // Grid search over S in [0, 1) minimizing the L2 residual.
    fn grid_phase(signal: &[f64], a: f64, f: f64, b: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..10_000 {
            let s = i as f64 * 1e-4;
            let r: f64 = signal
                .iter()
                .enumerate()
                .map(|(t, &y)| (y - b - a * (2.0 * PI * (f * t as f64 - s)).sin()).powi(2))
                .sum();
            if r < best.0 {
                best = (r, s);
            }
        }
        best.1
    }

    #[test]
    fn constant_signal() {
        let p = extract_params(&[3.0; 16]).unwrap();
        assert!(p.amplitude < 1e-9);
        assert_eq!(p.frequency, 0.0);
        assert!((p.offset - 3.0).abs() < 1e-12);
        assert_eq!(p.phase_shift, 0.0);
    }

    #[test]
    fn sine_with_offset() {
        let s = sine(2.0, 3, 32, 0.0, 1.0);
        let p = extract_params(&s).unwrap();
        assert!((p.amplitude - 2.0).abs() < 1e-6);
        assert!((p.frequency - 3.0 / 32.0).abs() < 1e-9);
        assert!((p.offset - 1.0).abs() < 1e-9);
        assert!(circular_distance(p.phase_shift, 0.0).abs() < 1e-6);
    }

    #[test]
    fn two_equal_power_bins_average_frequency() {
        let a = sine(1.0, 2, 32, 0.1, 0.0);
        let b = sine(1.0, 6, 32, 0.7, 0.0);
        let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let p = extract_params(&s).unwrap();
        assert!((p.frequency - 0.125).abs() < 1e-12);
    }

    #[test]
    fn quarter_cycle_shift_matches_grid_search() {
        let s = sine(1.5, 3, 32, 0.25, 0.0);
        let grid = grid_phase(&s, 1.5, 3.0 / 32.0, 0.0);
        assert!((grid - 0.25).abs() < 1e-4);
        let est = phase_shift(&s, 3.0 / 32.0);
        assert!(circular_distance(est, 0.25).abs() < 1e-4);
        assert!(circular_distance(est, grid).abs() < 2e-4);
    }

    #[test]
    fn zero_frequency_gives_zero_phase() {
        assert_eq!(phase_shift(&[1.0, -1.0, 2.0, 0.5], 0.0), 0.0);
    }

    #[test]
    fn reconstruct_quarter_periods() {
        let p = PeriodicParams {
            amplitude: 1.0,
            frequency: 0.25,
            offset: 0.0,
            phase_shift: 0.0,
        };
        let y = reconstruct_periodic(&p, 4);
        for (a, b) in y.iter().zip([0.0, 1.0, 0.0, -1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = reconstruct_periodic(
            &PeriodicParams {
                amplitude: 0.0,
                offset: 2.5,
                ..p
            },
            5,
        );
        assert!(flat.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn round_trip_bin_aligned() {
        let s = sine(4.0, 5, 34, 0.6, -1.5);
        let p = extract_params(&s).unwrap();
        let r = reconstruct_periodic(&p, s.len());
        let err = s.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn wrap_and_circular() {
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert!(wrap_unit(-1e-18) < 1.0);
        assert!((circular_distance(0.9, 0.1) + 0.2).abs() < 1e-12);
        assert!((circular_distance(0.1, 0.9) - 0.2).abs() < 1e-12);
    }
}
