use std::f64::consts::PI;

use num_complex::Complex64;

use super::SpectrumError;

/// Half spectrum of a real signal: bins `0..=K` with `K = T / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumFrame {
    coeffs: Vec<Complex64>,
    len: usize,
}

impl SpectrumFrame {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Length `T` of the transformed signal.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Highest bin index `K = T / 2`.
    pub fn nyquist_bin(&self) -> usize {
        self.len / 2
    }

    /// Sum of `|Q_j|^2` over the full (two-sided) spectrum.
    pub fn two_sided_energy(&self) -> f64 {
        let k = self.nyquist_bin();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, q)| {
                let w = if j == 0 || j == k { 1.0 } else { 2.0 };
                w * q.norm_sqr()
            })
            .sum()
    }
}

/// Per-channel power spectrum, `P_j = (2/T) |Q_j|^2` for `j = 1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSpectrum {
    /// `values[j - 1]` holds `P_j`.
    pub values: Vec<f64>,
    /// Mean of the signal, `Re(Q_0) / T`.
    pub dc: f64,
}

impl PowerSpectrum {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Transforms a real signal of even length, keeping bins `0..=T/2`.
///
/// The transform factors `T` into primes and recurses (radix-2 for powers of
/// two); prime-length stages use the direct sum.
pub fn dft_real(signal: &[f64]) -> Result<SpectrumFrame, SpectrumError> {
    let n = signal.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(SpectrumError::InvalidLength(n));
    }
    let input: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut coeffs = fft(&input);
    coeffs.truncate(n / 2 + 1);
    Ok(SpectrumFrame { coeffs, len: n })
}

/// Forward complex DFT of arbitrary length, `X_k = Σ x_t exp(-i 2π k t / n)`.
pub fn fft(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len();
    if n == 0 {
        return Vec::new();
    }
    let table: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
        .collect();
    fft_recursive(input, &table, 1)
}

fn smallest_factor(n: usize) -> usize {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut f = 3;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return f;
        }
        f += 2;
    }
    n
}

// `table[j * stride]` is the j-th power of the primitive root of order `x.len()`.
fn fft_recursive(x: &[Complex64], table: &[Complex64], stride: usize) -> Vec<Complex64> {
    let n = x.len();
    if n == 1 {
        return x.to_vec();
    }
    let p = smallest_factor(n);
    if p == n {
        return (0..n)
            .map(|k| {
                (0..n)
                    .map(|t| x[t] * table[((k * t) % n) * stride])
                    .sum()
            })
            .collect();
    }
    let m = n / p;
    let subs: Vec<Vec<Complex64>> = (0..p)
        .map(|r| {
            let sub: Vec<Complex64> = (0..m).map(|q| x[q * p + r]).collect();
            fft_recursive(&sub, table, stride * p)
        })
        .collect();
    (0..n)
        .map(|k| {
            let km = k % m;
            (0..p)
                .map(|r| subs[r][km] * table[((r * k) % n) * stride])
                .sum()
        })
        .collect()
}

pub fn power_spectrum(frame: &SpectrumFrame) -> PowerSpectrum {
    let t = frame.len() as f64;
    let values = frame.coeffs()[1..]
        .iter()
        .map(|q| 2.0 / t * q.norm_sqr())
        .collect();
    PowerSpectrum {
        values,
        dc: frame.coeffs()[0].re / t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(signal: &[f64]) -> Vec<Complex64> {
        let n = signal.len();
        (0..=n / 2)
            .map(|j| {
                signal
                    .iter()
                    .enumerate()
                    .map(|(t, &y)| {
                        y * Complex64::from_polar(1.0, -2.0 * PI * (j * t) as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn dc_only() {
        let f = dft_real(&[1.0; 8]).unwrap();
        assert!((f.coeffs()[0].re - 8.0).abs() < 1e-12);
        for q in &f.coeffs()[1..] {
            assert!(q.norm() < 1e-12);
        }
    }

    #[test]
    fn single_cosine() {
        let s: Vec<f64> = (0..8).map(|t| (2.0 * PI * t as f64 / 8.0).cos()).collect();
        let f = dft_real(&s).unwrap();
        let oracle = naive(&s);
        assert!((oracle[1].re - 4.0).abs() < 1e-12);
        for (j, q) in f.coeffs().iter().enumerate() {
            let expect = if j == 1 { 4.0 } else { 0.0 };
            assert!((q.re - expect).abs() < 1e-12 && q.im.abs() < 1e-12, "bin {j}: {q}");
        }
    }

    #[test]
    fn non_power_of_two_matches_direct_sum() {
        let s: Vec<f64> = (0..34).map(|t| ((t * 7919) % 31) as f64 / 7.0 - 2.0).collect();
        let f = dft_real(&s).unwrap();
        let oracle = naive(&s);
        let scale = oracle.iter().map(|q| q.norm()).fold(0.0, f64::max);
        for (a, b) in f.coeffs().iter().zip(&oracle) {
            assert!((a - b).norm() / scale < 1e-12);
        }
    }

    #[test]
    fn odd_length_rejected() {
        assert_eq!(dft_real(&[1.0; 7]), Err(SpectrumError::InvalidLength(7)));
        assert_eq!(dft_real(&[]), Err(SpectrumError::InvalidLength(0)));
    }

    #[test]
    fn power_of_bin_aligned_sine() {
        // |Q_j| = A T / 2, so P_j = (2/T) (A T / 2)^2 = A^2 T / 2 = 16 for A=2, T=8.
        let s: Vec<f64> = (0..8)
            .map(|t| 2.0 * (2.0 * PI * 2.0 * t as f64 / 8.0).sin())
            .collect();
        let p = power_spectrum(&dft_real(&s).unwrap());
        assert!((p.values[1] - 16.0).abs() < 1e-10);
        assert!(p.values.iter().enumerate().all(|(i, v)| i == 1 || v.abs() < 1e-20));
        assert!(p.dc.abs() < 1e-12);
    }

    #[test]
    fn power_zero_and_scaling() {
        let p = power_spectrum(&dft_real(&[0.0; 16]).unwrap());
        assert!(p.values.iter().all(|&v| v == 0.0));

        let s: Vec<f64> = (0..16).map(|t| ((t * t) % 5) as f64).collect();
        let scaled: Vec<f64> = s.iter().map(|v| 3.0 * v).collect();
        let p1 = power_spectrum(&dft_real(&s).unwrap());
        let p3 = power_spectrum(&dft_real(&scaled).unwrap());
        for (a, b) in p1.values.iter().zip(&p3.values) {
            assert!((9.0 * a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}
