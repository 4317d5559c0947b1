use std::f64::consts::PI;

use hipgest::autodiff::gradcheck::{check_params, FD_STEP};
use hipgest::autodiff::{AutodiffError, Graph};
use hipgest::pae::*;
use hipgest::spectrum::{decompose_topk, PeriodicParams};
use hipgest::Matrix;
use proptest::prelude::*;

fn tiny_config() -> PaeConfig {
    PaeConfig {
        input_channels: 3,
        latent_channels: 2,
        window: 8,
        hidden_channels: 4,
        kernel_width: 3,
        epochs: 3,
        batch_size: 2,
        ..PaeConfig::default()
    }
}

fn random_window(rows: usize, cols: usize, seed: u64) -> Matrix {
    let ds = generate_synthetic(1, rows, cols, seed);
    ds.windows[0].clone()
}

#[test]
fn default_encoder_output_is_window_by_ten() {
    let model = PaeModel::new(PaeConfig::default()).unwrap();
    let ds = generate_synthetic(1, 34, 141, 3);
    let y = model.encode(&ds.windows[0]).unwrap();
    assert_eq!((y.rows(), y.cols()), (34, 10));
    assert!(y.is_finite());
    assert_eq!(model.encode(&ds.windows[0]).unwrap(), y);
}

#[test]
fn zero_input_gives_zero_latent_and_output() {
    let model = PaeModel::new(PaeConfig::default()).unwrap();
    let y = model.encode(&Matrix::zeros(34, 141)).unwrap();
    assert!(y.as_slice().iter().all(|&v| v == 0.0));
    let out = model.decode(&Matrix::zeros(34, 10), Some(&Matrix::zeros(34, 10))).unwrap();
    assert_eq!((out.rows(), out.cols()), (34, 141));
    assert!(out.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn encode_rejects_wrong_shapes() {
    let model = PaeModel::new(tiny_config()).unwrap();
    assert!(matches!(model.encode(&Matrix::zeros(8, 4)), Err(PaeError::Shape(_))));
    assert!(matches!(model.encode(&Matrix::zeros(10, 3)), Err(PaeError::Shape(_))));
    assert!(matches!(
        model.decode(&Matrix::zeros(8, 2), Some(&Matrix::zeros(7, 2))),
        Err(PaeError::Shape(_))
    ));
}

#[test]
fn analytic_phase_head_reproduces_bin_aligned_channels() {
    let t_len = 34;
    let model_cfg = PaeConfig {
        latent_channels: 3,
        ..PaeConfig::default()
    };
    let mut model = PaeModel::new(model_cfg).unwrap();
    let tones = [(3usize, 1.7, 0.3, 0.25), (5, 0.4, -1.0, 0.9), (1, 2.5, 0.0, 0.05)];
    let y = Matrix::from_fn(t_len, 3, |t, c| {
        let (bin, a, b, s) = tones[c];
        a * (2.0 * PI * (bin as f64 / t_len as f64 * t as f64 - s)).sin() + b
    });
    for (c, &(bin, ..)) in tones.iter().enumerate() {
        model.set_phase_head(c, bin as f64 / t_len as f64).unwrap();
    }
    let mut g = Graph::new();
    let yv = g.constant((&y).into());
    let (_, phase, periodic) = model.periodic_branch_graph(&mut g, yv).unwrap();
    let rec = g.value(periodic).to_matrix();
    assert!(rec.max_abs_diff(&y) <= 1e-3, "max err {}", rec.max_abs_diff(&y));
    for (c, &(.., s)) in tones.iter().enumerate() {
        let got = g.value(phase).data()[c];
        assert!(hipgest::spectrum::circular_distance(got, s).abs() < 1e-9);
    }
}

#[test]
fn zero_latent_channel_reconstructs_to_zero() {
    let model = PaeModel::new(tiny_config()).unwrap();
    let mut g = Graph::new();
    let yv = g.constant((&Matrix::zeros(8, 2)).into());
    let (_, _, periodic) = model.periodic_branch_graph(&mut g, yv).unwrap();
    assert_eq!(g.value(periodic).shape(), &[8, 2]);
    assert!(g.value(periodic).data().iter().all(|&v| v == 0.0));
}

#[test]
fn disabled_nonperiodic_branch_feeds_periodic_part_only() {
    let cfg = PaeConfig {
        nonperiodic_enabled: false,
        ..tiny_config()
    };
    let model = PaeModel::new(cfg).unwrap();
    let x = random_window(8, 3, 1);
    let mut g = Graph::new();
    let xv = g.constant((&x).into());
    let f = model.forward_graph(&mut g, xv).unwrap();
    assert!(f.nonperiodic.is_none());
    assert_eq!(g.value(f.decoder_input), g.value(f.periodic));
    let out = model.run(&x).unwrap();
    assert!(out.nonperiodic.is_none());
}

#[test]
fn nonperiodic_branch_matches_periodic_shape() {
    let model = PaeModel::new(tiny_config()).unwrap();
    let out = model.run(&random_window(8, 3, 2)).unwrap();
    let np = out.nonperiodic.unwrap();
    assert_eq!((np.rows(), np.cols()), (out.periodic.rows(), out.periodic.cols()));
    let again = model.run(&random_window(8, 3, 2)).unwrap();
    assert_eq!(again.nonperiodic.unwrap(), np);
}

#[test]
fn decoding_is_symmetric_in_branches() {
    let model = PaeModel::new(tiny_config()).unwrap();
    let a = random_window(8, 2, 4);
    let b = random_window(8, 2, 5);
    let ab = model.decode(&a, Some(&b)).unwrap();
    let ba = model.decode(&b, Some(&a)).unwrap();
    assert!(ab.max_abs_diff(&ba) <= 1e-12);
}

#[test]
fn reconstruction_loss_examples() {
    let x = random_window(8, 3, 6);
    let run = |recon: &Matrix, lambda: f64| {
        let mut g = Graph::new();
        let a = g.constant((&x).into());
        let b = g.constant(recon.into());
        let l = loss_rec(&mut g, a, b, lambda, 1.0 / 15.0).unwrap();
        (g.value(l.total).item(), g.value(l.l1).item())
    };
    assert_eq!(run(&x, 0.7).0, 0.0);
    let shifted = Matrix::from_fn(8, 3, |t, c| x.get(t, c) - 0.35);
    let (total, _) = run(&shifted, 3.0);
    assert!((total - 0.35).abs() < 1e-12);
    let other = random_window(8, 3, 7);
    let (total, l1) = run(&other, 0.0);
    assert_eq!(total, l1);
}

fn unwrap_autodiff(e: PaeError) -> AutodiffError {
    match e {
        PaeError::Autodiff(a) => a,
        other => AutodiffError::Shape(other.to_string()),
    }
}

#[test]
fn tiny_model_parameter_gradients_match_finite_differences() {
    for enabled in [true, false] {
        let cfg = PaeConfig {
            nonperiodic_enabled: enabled,
            ..tiny_config()
        };
        let model = PaeModel::new(cfg.clone()).unwrap();
        let x = random_window(8, 3, 11);
        let res = check_params(model.params(), FD_STEP, |g, store| {
            let mut m = model.clone();
            *m.params_mut() = store.clone();
            let xv = g.constant((&x).into());
            let f = m.forward_graph(g, xv).map_err(unwrap_autodiff)?;
            let l = loss_rec(g, xv, f.output, cfg.velocity_weight, 1.0 / cfg.fps)?;
            Ok(l.total)
        })
        .unwrap();
        assert!(res.passes(1e-4), "np={enabled}: {res:?}");
    }
}

#[test]
fn training_is_deterministic_and_logs_each_epoch() {
    let ds = generate_synthetic(6, 8, 3, 9);
    let cfg = tiny_config();
    let (m1, log1) = train(&ds.windows, &cfg).unwrap();
    let (m2, log2) = train(&ds.windows, &cfg).unwrap();
    assert_eq!(log1.epochs.len(), 3);
    let bits = |l: &TrainLog| l.loss_curve().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&log1), bits(&log2));
    assert_eq!(m1.save(), m2.save());
    let mut buf = Vec::new();
    log1.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("epoch,loss,l1,velocity\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn training_rejects_empty_and_misshapen_data() {
    assert_eq!(train(&[], &tiny_config()).unwrap_err(), PaeError::EmptyDataset);
    let bad = vec![Matrix::zeros(8, 4)];
    assert!(matches!(train(&bad, &tiny_config()), Err(PaeError::Shape(_))));
}

#[test]
fn non_finite_data_aborts_with_position() {
    let mut ds = generate_synthetic(4, 8, 3, 2).windows;
    ds[0].set(0, 0, f64::NAN);
    assert_eq!(train(&ds, &tiny_config()).unwrap_err(), PaeError::NonFiniteInput(0));
    let huge: Vec<Matrix> = (0..4)
        .map(|_| Matrix::from_fn(8, 3, |t, _| if t % 2 == 0 { 1e307 } else { -1e307 }))
        .collect();
    assert_eq!(
        train(&huge, &tiny_config()).unwrap_err(),
        PaeError::NonFiniteLoss { epoch: 0, batch: 0 }
    );
}

#[test]
fn checkpoint_round_trip_preserves_outputs() {
    let model = PaeModel::new(tiny_config()).unwrap();
    let x = random_window(8, 3, 12);
    let back = PaeModel::load(&model.save()).unwrap();
    assert_eq!(back.config(), model.config());
    assert_eq!(back.run(&x).unwrap().reconstruction, model.run(&x).unwrap().reconstruction);
    assert!(PaeModel::load(b"junk").is_err());
}

#[test]
fn default_training_halves_loss_within_fifty_epochs() {
    let ds = generate_synthetic(64, 34, 141, 0);
    let cfg = PaeConfig {
        epochs: 50,
        ..PaeConfig::default()
    };
    let (_, log) = train(&ds.windows, &cfg).unwrap();
    let c = log.loss_curve();
    assert!(c[49] <= 0.5 * c[0], "first {} last {}", c[0], c[49]);
}

#[test]
fn synthetic_dataset_is_seeded_and_splits_exactly() {
    let a = generate_synthetic(5, 34, 20, 7);
    assert_eq!(a, generate_synthetic(5, 34, 20, 7));
    assert_ne!(a.windows, generate_synthetic(5, 34, 20, 8).windows);
    for i in 0..5 {
        let sum = Matrix::from_fn(34, 20, |t, c| a.periodic[i].get(t, c) + a.nonperiodic[i].get(t, c));
        assert!(sum.max_abs_diff(&a.windows[i]) <= 1e-12);
        assert_eq!(a.tones[i].len(), 3);
    }
}

#[test]
fn burst_free_windows_are_captured_by_three_bins() {
    let cfg = SyntheticConfig {
        burst_prob: 0.0,
        windows: 16,
        channels: 40,
        seed: 5,
        ..SyntheticConfig::default()
    };
    let ds = generate_synthetic_with(&cfg);
    for w in &ds.windows {
        for c in 0..w.cols() {
            let d = decompose_topk(&w.column(c), 3).unwrap();
            let worst = d.nonperiodic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst <= 1e-9, "residual {worst}");
        }
    }
}

#[test]
fn single_window_manifold_is_flagged_degenerate() {
    let model = PaeModel::new(tiny_config()).unwrap();
    let m = export_phase_manifold(&model, &[random_window(8, 3, 1)]).unwrap();
    assert!(m.degenerate);
    assert_eq!(m.projection, vec![[0.0, 0.0]]);
    assert_eq!(m.samples[0].points.len(), 2);
    assert_eq!(export_phase_manifold(&model, &[]).unwrap_err(), PaeError::EmptyDataset);
}

#[test]
fn rotating_phase_lies_on_circle() {
    let amp = 1.3;
    let params: Vec<PeriodicParams> = (0..50)
        .map(|i| PeriodicParams {
            amplitude: amp,
            frequency: 0.1,
            offset: 0.0,
            phase_shift: (i as f64 * 0.037) % 1.0,
        })
        .collect();
    for p in phase_points(&params) {
        assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - amp).abs() <= 1e-6);
    }
}

#[test]
fn manifold_csv_has_one_row_per_window_channel() {
    let model = PaeModel::new(tiny_config()).unwrap();
    let data: Vec<Matrix> = (0..3).map(|s| random_window(8, 3, s)).collect();
    let m = export_phase_manifold(&model, &data).unwrap();
    assert!(!m.degenerate);
    let mut buf = Vec::new();
    write_manifold_csv(&mut buf, &m).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "window,channel,x,y,pca_x,pca_y");
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

proptest! {
    #[test]
    fn manifold_point_norm_equals_amplitude(a in 0.0f64..20.0, s in 0.0f64..1.0) {
        let p = phase_points(&[PeriodicParams { amplitude: a, frequency: 0.2, offset: 1.0, phase_shift: s }])[0];
        prop_assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - a).abs() <= 1e-9);
    }

    #[test]
    fn planar_pca_preserves_distances(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..30)) {
        let v: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
        let (proj, degenerate) = pca_2d(&v).unwrap();
        prop_assume!(!degenerate);
        for i in 0..v.len() {
            for j in 0..v.len() {
                let orig = dist([v[i][0], v[i][1]], [v[j][0], v[j][1]]);
                prop_assert!((dist(proj[i], proj[j]) - orig).abs() <= 1e-9);
            }
        }
    }
}
