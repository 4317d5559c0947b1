use std::f64::consts::PI;

use num_complex::Complex64;

use super::{dft_real, power_spectrum, SpectrumError, SpectrumFrame};

/// Split of a signal into a few dominant Fourier components and the residual.
#[derive(Clone, Debug)]
pub struct BasisDecomposition {
    /// Mean plus the selected Fourier components.
    pub periodic: Vec<f64>,
    /// `signal - periodic`; zero-mean because DC is always kept in `periodic`.
    pub nonperiodic: Vec<f64>,
    /// Non-DC bins kept, strongest first.
    pub selected_bins: Vec<usize>,
    pub k: usize,
    frame: SpectrumFrame,
}

impl BasisDecomposition {
    /// One real basis function per selected bin, in the order of `selected_bins`.
    pub fn basis_components(&self) -> Vec<Vec<f64>> {
        self.selected_bins
            .iter()
            .map(|&j| bin_component(&self.frame, j))
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.frame.coeffs()[0].re / self.frame.len() as f64
    }
}

// Real signal contributed by bin j and its conjugate mirror.
fn bin_component(frame: &SpectrumFrame, j: usize) -> Vec<f64> {
    let n = frame.len();
    let q = frame.coeffs()[j];
    let mirror = if j == 0 || j == frame.nyquist_bin() { 1.0 } else { 2.0 };
    (0..n)
        .map(|t| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * (j * t % n) as f64 / n as f64);
            mirror * (q * e).re / n as f64
        })
        .collect()
}

/// Keeps DC plus the `k` bins of largest power; ties resolve to the lower bin.
pub fn decompose_topk(signal: &[f64], k: usize) -> Result<BasisDecomposition, SpectrumError> {
    let frame = dft_real(signal)?;
    let power = power_spectrum(&frame);
    let mut order: Vec<usize> = (1..=frame.nyquist_bin()).collect();
    order.sort_by(|&a, &b| {
        power.values[b - 1]
            .partial_cmp(&power.values[a - 1])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);

    let n = signal.len();
    let mut periodic = vec![power.dc; n];
    for &j in &order {
        for (p, c) in periodic.iter_mut().zip(bin_component(&frame, j)) {
            *p += c;
        }
    }
    let nonperiodic = signal.iter().zip(&periodic).map(|(s, p)| s - p).collect();
    Ok(BasisDecomposition {
        periodic,
        nonperiodic,
        selected_bins: order,
        k,
        frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn full_basis_leaves_no_residual() {
        let s: Vec<f64> = (0..16).map(|t| ((t * 13) % 7) as f64 - 1.5).collect();
        let d = decompose_topk(&s, 8).unwrap();
        assert!(max_abs(&d.nonperiodic) < 1e-9);
        let d = decompose_topk(&s, 100).unwrap();
        assert_eq!(d.selected_bins.len(), 8);
        assert!(max_abs(&d.nonperiodic) < 1e-9);
    }

    #[test]
    fn k_zero_is_mean() {
        let s = [1.0, 3.0, -2.0, 6.0];
        let d = decompose_topk(&s, 0).unwrap();
        assert!(d.periodic.iter().all(|&p| (p - 2.0).abs() < 1e-12));
        for (r, x) in d.nonperiodic.iter().zip(s) {
            assert!((r - (x - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_plus_impulse() {
        let n = 32;
        let mut s: Vec<f64> = (0..n)
            .map(|t| 3.0 * (2.0 * PI * 4.0 * t as f64 / n as f64).sin())
            .collect();
        s[9] += 2.0;
        let d = decompose_topk(&s, 1).unwrap();
        assert_eq!(d.selected_bins, vec![4]);
        let mean: f64 = d.nonperiodic.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() <= 1e-9);
        // The impulse spreads 2/32 onto bin 4 as well; the sinusoid dominates.
        let basis = &d.basis_components()[0];
        assert!(basis.iter().zip(&s).all(|(b, _)| b.abs() <= 3.2));
    }
}
