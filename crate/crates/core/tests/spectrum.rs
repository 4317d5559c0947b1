use std::f64::consts::TAU;

use hipgest::spectrum::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct O(T²) sum over bins `0..=T/2`.
fn naive_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| Complex64::from_polar(v, -TAU * (k * t) as f64 / n as f64))
                .sum()
        })
        .collect()
}

#[test]
fn fast_transform_matches_direct_sum_on_random_signals() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for len in [8usize, 32, 34, 64] {
        for _ in 0..1000 {
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let fast = dft_real(&x).unwrap();
            let slow = naive_dft(&x);
            let scale = slow.iter().map(|c| c.norm()).fold(1.0, f64::max);
            for (a, b) in fast.coeffs().iter().zip(&slow) {
                assert!((a - b).norm() <= 1e-9 * scale, "T={len}: {a} vs {b}");
            }
        }
    }
}

fn sine(a: f64, bin: usize, len: usize, s: f64, b: f64) -> Vec<f64> {
    let f = bin as f64 / len as f64;
    (0..len).map(|t| a * (TAU * (f * t as f64 - s)).sin() + b).collect()
}

proptest! {
    #[test]
    fn transform_is_linear(
        x in prop::collection::vec(-5.0f64..5.0, 34),
        y in prop::collection::vec(-5.0f64..5.0, 34),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let (fx, fy, fm) = (dft_real(&x).unwrap(), dft_real(&y).unwrap(), dft_real(&mixed).unwrap());
        for ((p, q), r) in fx.coeffs().iter().zip(fy.coeffs()).zip(fm.coeffs()) {
            prop_assert!((p * a + q * b - r).norm() < 1e-9);
        }
    }

    #[test]
    fn bin_aligned_sinusoid_parameters_recovered(
        a in 0.01f64..10.0,
        b in -5.0f64..5.0,
        s in 0.0f64..1.0,
        bin in 1usize..16,
    ) {
        let p = extract_params(&sine(a, bin, 34, s, b)).unwrap();
        prop_assert!((p.amplitude - a).abs() <= 1e-6);
        prop_assert!((p.offset - b).abs() <= 1e-6);
        prop_assert!((p.frequency - bin as f64 / 34.0).abs() <= 1e-9);
        prop_assert!(circular_distance(p.phase_shift, s).abs() <= 1e-6);
    }

    #[test]
    fn decomposition_is_exact_and_energy_grows_with_k(x in prop::collection::vec(-5.0f64..5.0, 34)) {
        let mut last = -1.0;
        for k in 0..=17 {
            let d = decompose_topk(&x, k).unwrap();
            for t in 0..34 {
                prop_assert!((d.periodic[t] + d.nonperiodic[t] - x[t]).abs() <= 1e-9);
            }
            let energy: f64 = d.periodic.iter().map(|v| v * v).sum();
            prop_assert!(energy >= last - 1e-9);
            last = energy;
        }
    }

    #[test]
    fn amplitude_and_offset_scale_frequency_and_phase_do_not(
        x in prop::collection::vec(-5.0f64..5.0, 34),
        c in 0.05f64..20.0,
    ) {
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let (p, q) = (extract_params(&x).unwrap(), extract_params(&scaled).unwrap());
        prop_assert!((q.amplitude - c * p.amplitude).abs() <= 1e-9 * q.amplitude.max(1.0));
        prop_assert!((q.offset - c * p.offset).abs() <= 1e-9 * c.max(1.0) * 5.0);
        prop_assert!((q.frequency - p.frequency).abs() <= 1e-9);
        prop_assert!(circular_distance(q.phase_shift, p.phase_shift).abs() <= 1e-9);
    }

    #[test]
    fn extraction_is_deterministic(x in prop::collection::vec(-5.0f64..5.0, 34)) {
        prop_assert_eq!(extract_params(&x).unwrap(), extract_params(&x).unwrap());
    }
}
