use hipgest::autodiff::gradcheck::{check_inputs, FD_STEP};
use hipgest::autodiff::{AutodiffError, ConvSpec, Dense, Graph, GruCell, ParamStore, Tensor, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;
const INSTANCES: u64 = 20;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Reduces a tensor to a scalar through a fixed random weighting so every
/// output element contributes a distinct gradient.
fn project(g: &mut Graph, v: Var, seed: u64) -> Result<Var, AutodiffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = random(&mut rng, g.value(v).shape(), 1.0);
    let w = g.constant(w);
    let p = g.mul(v, w)?;
    g.sum_all(p)
}

fn assert_gradients<F>(name: &str, make: impl Fn(&mut ChaCha8Rng) -> Vec<Tensor>, f: F)
where
    F: Fn(&mut Graph, &[Var], u64) -> Result<Var, AutodiffError>,
{
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = make(&mut rng);
        let report = check_inputs(&inputs, FD_STEP, |g, v| f(g, v, seed)).unwrap();
        assert!(
            report.passes(TOL),
            "{name} seed {seed}: rel error {:.3e} at {:?} (analytic {}, numeric {})",
            report.max_rel_error,
            report.worst,
            report.analytic,
            report.numeric
        );
    }
}

fn mat(rows: usize, cols: usize, data: &[f64]) -> Tensor {
    Tensor::matrix(rows, cols, data.to_vec()).unwrap()
}

#[test]
fn conv1d_examples() {
    let mut g = Graph::new();
    let x = g.constant(mat(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]));
    let id = g.constant(Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap());
    let y = g.conv1d(x, id, None, ConvSpec::valid()).unwrap();
    assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
    let ones = g.constant(Tensor::new(vec![1, 1, 3], vec![1.0; 3]).unwrap());
    let y = g.conv1d(x, ones, None, ConvSpec::valid()).unwrap();
    assert_eq!(g.value(y).data(), &[6.0, 9.0, 12.0]);
    let strided = ConvSpec {
        stride: 2,
        ..ConvSpec::padded(1)
    };
    let y = g.conv1d(x, ones, None, strided).unwrap();
    // Padded input [0,1,2,3,4,5,0]; windows at 0, 2, 4.
    assert_eq!(g.value(y).data(), &[3.0, 9.0, 9.0]);
    let wide = g.constant(Tensor::new(vec![1, 1, 8], vec![1.0; 8]).unwrap());
    assert!(matches!(g.conv1d(x, wide, None, ConvSpec::valid()), Err(AutodiffError::Shape(_))));
    let two_in = g.constant(Tensor::new(vec![1, 2, 1], vec![1.0; 2]).unwrap());
    assert!(matches!(g.conv1d(x, two_in, None, ConvSpec::valid()), Err(AutodiffError::Shape(_))));
}

#[test]
fn conv1d_gradients() {
    let specs = [
        ConvSpec::valid(),
        ConvSpec::same(3, 1),
        ConvSpec::causal(3, 2),
        ConvSpec {
            stride: 2,
            ..ConvSpec::padded(1)
        },
    ];
    for (i, spec) in specs.into_iter().enumerate() {
        assert_gradients(
            &format!("conv1d spec {i}"),
            |rng| vec![random(rng, &[9, 3], 1.0), random(rng, &[4, 3, 3], 1.0), random(rng, &[4], 1.0)],
            |g, v, s| {
                let y = g.conv1d(v[0], v[1], Some(v[2]), spec)?;
                project(g, y, s)
            },
        );
    }
}

#[test]
fn causal_conv_ignores_future_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random(&mut rng, &[12, 2], 1.0);
    let k = random(&mut rng, &[3, 2, 3], 1.0);
    let run = |x: Tensor| {
        let mut g = Graph::new();
        let (xv, kv) = (g.constant(x), g.constant(k.clone()));
        let y = g.conv1d(xv, kv, None, ConvSpec::causal(3, 4)).unwrap();
        g.value(y).clone()
    };
    let base = run(x.clone());
    let mut bumped = x;
    bumped.data_mut()[7 * 2] += 10.0;
    let other = run(bumped);
    assert_eq!(&base.data()[..7 * 3], &other.data()[..7 * 3]);
    assert_ne!(base.data()[7 * 3], other.data()[7 * 3]);
}

#[test]
fn dense_examples_and_gradients() {
    let mut g = Graph::new();
    let x = g.constant(mat(1, 2, &[1.0, 1.0]));
    let w = g.constant(mat(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let y = g.dense(x, w, None).unwrap();
    assert_eq!(g.value(y).data(), &[3.0, 7.0]);
    let eye = g.constant(mat(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let zero = g.constant(Tensor::zeros(&[2]));
    let x2 = g.constant(mat(1, 2, &[-0.5, 4.0]));
    let y = g.dense(x2, eye, Some(zero)).unwrap();
    assert_eq!(g.value(y).data(), &[-0.5, 4.0]);
    let bad = g.constant(mat(2, 3, &[0.0; 6]));
    assert!(g.dense(x, bad, None).is_err());

    assert_gradients(
        "dense",
        |rng| vec![random(rng, &[4, 5], 1.0), random(rng, &[3, 5], 1.0), random(rng, &[3], 1.0)],
        |g, v, s| {
            let y = g.dense(v[0], v[1], Some(v[2]))?;
            project(g, y, s)
        },
    );
}

#[test]
fn elementwise_and_structural_gradients() {
    let pair = |rng: &mut ChaCha8Rng| vec![random(rng, &[4, 3], 1.5), random(rng, &[4, 3], 1.5)];
    assert_gradients("add", pair, |g, v, s| {
        let y = g.add(v[0], v[1])?;
        project(g, y, s)
    });
    assert_gradients("sub", pair, |g, v, s| {
        let y = g.sub(v[0], v[1])?;
        project(g, y, s)
    });
    assert_gradients("mul", pair, |g, v, s| {
        let y = g.mul(v[0], v[1])?;
        project(g, y, s)
    });
    assert_gradients("scale+tanh+sigmoid", pair, |g, v, s| {
        let a = g.scale(v[0], -1.7)?;
        let a = g.tanh(a)?;
        let b = g.sigmoid(v[1])?;
        let y = g.add(a, b)?;
        project(g, y, s)
    });
    assert_gradients(
        "add_bias",
        |rng| vec![random(rng, &[4, 3], 1.0), random(rng, &[3], 1.0)],
        |g, v, s| {
            let y = g.add_bias(v[0], v[1])?;
            project(g, y, s)
        },
    );
    assert_gradients("concat/slice cols", pair, |g, v, s| {
        let c = g.concat_cols(&[v[0], v[1]])?;
        let y = g.slice_cols(c, 2, 3)?;
        project(g, y, s)
    });
    assert_gradients("concat/slice rows + transpose", pair, |g, v, s| {
        let c = g.concat_rows(&[v[0], v[1]])?;
        let c = g.slice_rows(c, 1, 5)?;
        let y = g.transpose(c)?;
        project(g, y, s)
    });
    assert_gradients(
        "row_sums + mul_col",
        |rng| vec![random(rng, &[4, 3], 1.0), random(rng, &[4, 1], 1.0)],
        |g, v, s| {
            let m = g.mul_col(v[0], v[1])?;
            let r = g.row_sums(m)?;
            project(g, r, s)
        },
    );
    assert_gradients(
        "instance_norm",
        |rng| vec![random(rng, &[6, 3], 2.0)],
        |g, v, s| {
            let y = g.instance_norm(v[0], 1e-5)?;
            project(g, y, s)
        },
    );
    assert_gradients(
        "softmax_rows",
        |rng| vec![random(rng, &[4, 5], 2.0)],
        |g, v, s| {
            let y = g.softmax_rows(v[0])?;
            project(g, y, s)
        },
    );
    assert_gradients(
        "mean_all",
        |rng| vec![random(rng, &[3, 3], 1.0)],
        |g, v, _| {
            let sq = g.mul(v[0], v[0])?;
            g.mean_all(sq)
        },
    );
}

#[test]
fn phase_and_reconstruction_gradients() {
    assert_gradients(
        "phase_cycles",
        |rng| {
            // Keep points away from the origin and the wrap seam at angle 0.
            let n = 5;
            let mut sx = Vec::new();
            let mut sy = Vec::new();
            for _ in 0..n {
                let r = rng.gen_range(0.5..2.0);
                let a: f64 = rng.gen_range(0.2..6.0);
                sx.push(r * a.cos());
                sy.push(r * a.sin());
            }
            vec![mat(n, 1, &sx), mat(n, 1, &sy)]
        },
        |g, v, s| {
            let p = g.phase_cycles(v[0], v[1])?;
            project(g, p, s)
        },
    );
    assert_gradients(
        "periodic_recon",
        |rng| {
            let n = 3;
            let mut p = Vec::new();
            for _ in 0..n {
                p.extend([rng.gen_range(0.1..2.0), rng.gen_range(0.0..0.5), rng.gen_range(-1.0..1.0)]);
            }
            vec![mat(n, 3, &p), random(rng, &[n, 1], 1.0)]
        },
        |g, v, s| {
            let y = g.periodic_recon(v[0], v[1], 8)?;
            project(g, y, s)
        },
    );
    assert_gradients(
        "circular_diff squared",
        |rng| {
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
            // Offsets stay clear of ±0.5 where the wrap jumps.
            let b: Vec<f64> = a.iter().map(|x| x + rng.gen_range(-0.4..0.4)).collect();
            vec![mat(6, 1, &a), mat(6, 1, &b)]
        },
        |g, v, _| {
            let d = g.circular_diff(v[0], v[1])?;
            let sq = g.mul(d, d)?;
            g.sum_all(sq)
        },
    );
}

#[test]
fn fft_param_layer_gradients() {
    for t in [8usize, 34] {
        assert_gradients(
            &format!("fft_params T={t}"),
            |rng| vec![random(rng, &[t, 4], 1.0)],
            |g, v, s| {
                let p = g.fft_params(v[0])?;
                project(g, p, s)
            },
        );
    }
    // Amplitude only, on a random length-34 latent.
    assert_gradients(
        "fft amplitude",
        |rng| vec![random(rng, &[34, 1], 1.0)],
        |g, v, _| {
            let p = g.fft_params(v[0])?;
            let a = g.slice_cols(p, 0, 1)?;
            g.sum_all(a)
        },
    );
}

#[test]
fn fft_param_layer_examples() {
    let t = 34;
    let mut g = Graph::new();
    let y = g.variable(Tensor::zeros(&[t, 2]));
    let p = g.fft_params(y).unwrap();
    assert_eq!(g.value(p).data(), &[0.0; 6]);
    let b = g.slice_cols(p, 2, 1).unwrap();
    let b = g.sum_all(b).unwrap();
    g.backward(b).unwrap();
    for &gi in g.grad(y).unwrap() {
        assert!((gi - 1.0 / t as f64).abs() < 1e-15);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&mut rng, &[t, 3], 1.0);
    let doubled = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| 2.0 * v).collect()).unwrap();
    let mut g = Graph::new();
    let (a, b) = (g.constant(x), g.constant(doubled));
    let (pa, pb) = (g.fft_params(a).unwrap(), g.fft_params(b).unwrap());
    let (pa, pb) = (g.value(pa).clone(), g.value(pb).clone());
    for i in 0..3 {
        assert!((pb.get(i, 0) - 2.0 * pa.get(i, 0)).abs() < 1e-12);
        assert!((pb.get(i, 1) - pa.get(i, 1)).abs() < 1e-12);
    }
    let mut g = Graph::new();
    let odd = g.constant(Tensor::zeros(&[5, 1]));
    assert!(g.fft_params(odd).is_err());
}

#[test]
fn loss_examples() {
    let mut g = Graph::new();
    let x = g.constant(mat(2, 1, &[0.0, 2.0]));
    let y = g.constant(mat(2, 1, &[0.0, 0.0]));
    let l1 = g.l1(x, y).unwrap();
    let mse = g.mse(x, y).unwrap();
    let vel = g.velocity_l1(x, y, 1.0).unwrap();
    assert_eq!(g.value(l1).item(), 1.0);
    assert_eq!(g.value(mse).item(), 2.0);
    assert_eq!(g.value(vel).item(), 2.0);

    let same = g.l1(x, x).unwrap();
    assert_eq!(g.value(same).item(), 0.0);
    let same = g.mse(x, x).unwrap();
    assert_eq!(g.value(same).item(), 0.0);
    let same = g.velocity_l1(x, x, 0.1).unwrap();
    assert_eq!(g.value(same).item(), 0.0);

    let shifted = g.constant(mat(2, 1, &[3.0, 5.0]));
    let v = g.velocity_l1(shifted, x, 0.5).unwrap();
    assert_eq!(g.value(v).item(), 0.0);

    let wrong = g.constant(mat(1, 2, &[0.0, 0.0]));
    assert!(g.l1(x, wrong).is_err());
    assert!(g.velocity_l1(wrong, wrong, 1.0).is_err());
}

#[test]
fn loss_gradients() {
    let pair = |rng: &mut ChaCha8Rng| vec![random(rng, &[5, 3], 1.0), random(rng, &[5, 3], 1.0)];
    assert_gradients("l1", pair, |g, v, _| g.l1(v[0], v[1]));
    assert_gradients("mse", pair, |g, v, _| g.mse(v[0], v[1]));
    assert_gradients("velocity_l1", pair, |g, v, _| g.velocity_l1(v[0], v[1], 1.0 / 15.0));
}

#[test]
fn recurrent_cell() {
    let cell = GruCell::new("gru", 3, 4);
    let mut store = ParamStore::new();
    cell.init(&mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    for name in store.names().to_vec() {
        store.get_mut(&name).unwrap().data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    // With zero weights z = σ(bz) and n = tanh(bn), so from a zero state
    // h_t = tanh(bn) (1 - (1 - σ(bz))^t).
    let (bz, bn) = (0.3, -0.8);
    let b = store.get_mut("gru.in.b").unwrap().data_mut();
    b[..4].iter_mut().for_each(|v| *v = bz);
    b[8..].iter_mut().for_each(|v| *v = bn);
    let mut g = Graph::new();
    let x = g.constant(Tensor::zeros(&[5, 3]));
    let h = cell.sequence(&mut g, &store, x, None, false).unwrap();
    let z = 1.0 / (1.0 + (-bz).exp());
    for t in 0..5 {
        let expected = bn.tanh() * (1.0 - (1.0 - z).powi(t as i32 + 1));
        for c in 0..4 {
            assert!((g.value(h).get(t, c) - expected).abs() < 1e-14);
        }
    }
    let start = g.constant(Tensor::filled(&[1, 4], bn.tanh()));
    let x0 = g.slice_rows(x, 0, 1).unwrap();
    let fixed = cell.step(&mut g, &store, x0, start).unwrap();
    assert!(g.value(fixed).data().iter().all(|v| (v - bn.tanh()).abs() < 1e-15));

    let wrong = g.constant(Tensor::zeros(&[1, 3]));
    assert!(matches!(cell.step(&mut g, &store, x0, wrong), Err(AutodiffError::Shape(_))));
}

#[test]
fn recurrent_cell_gradients_and_determinism() {
    let cell = GruCell::new("gru", 2, 3);
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut store = ParamStore::new();
        cell.init(&mut store, &mut rng).unwrap();
        let names: Vec<&str> = cell.param_names();
        let mut inputs = vec![random(&mut rng, &[3, 2], 1.0), random(&mut rng, &[1, 3], 0.5)];
        inputs.extend(names.iter().map(|n| store.get(n).unwrap().clone()));
        let report = check_inputs(&inputs, FD_STEP, |g, v| {
            let h = run_cell(cell.dim, g, &v[2..], v[0], v[1])?;
            project(g, h, seed)
        })
        .unwrap();
        assert!(report.passes(TOL), "gru seed {seed}: {report:?}");
    }

    let mut store = ParamStore::new();
    cell.init(&mut store, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let run = || {
        let mut g = Graph::new();
        let x = g.constant(Tensor::filled(&[6, 2], 0.3));
        let h = cell.sequence(&mut g, &store, x, None, false).unwrap();
        g.value(h).clone()
    };
    assert_eq!(run(), run());
}

/// Three GRU steps with parameters taken from graph variables, so the
/// input-gradient checker also covers the weights.
fn run_cell(d: usize, g: &mut Graph, params: &[Var], x: Var, h0: Var) -> Result<Var, AutodiffError> {
    let (w_in, b_in, w_gate, w_cand) = (params[0], params[1], params[2], params[3]);
    let mut h = h0;
    let mut states = Vec::new();
    for t in 0..3 {
        let xt = g.slice_rows(x, t, 1)?;
        let xi = g.dense(xt, w_in, Some(b_in))?;
        let hg = g.dense(h, w_gate, None)?;
        let (xz, xr, xn) = (g.slice_cols(xi, 0, d)?, g.slice_cols(xi, d, d)?, g.slice_cols(xi, 2 * d, d)?);
        let (hz, hr) = (g.slice_cols(hg, 0, d)?, g.slice_cols(hg, d, d)?);
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z)?;
        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r)?;
        let rh = g.mul(r, h)?;
        let un = g.dense(rh, w_cand, None)?;
        let n = g.add(xn, un)?;
        let n = g.tanh(n)?;
        let delta = g.sub(n, h)?;
        let delta = g.mul(z, delta)?;
        h = g.add(h, delta)?;
        states.push(h);
    }
    g.concat_rows(&states)
}

#[test]
fn recurrent_cell_matches_manual_unroll() {
    let cell = GruCell::new("gru", 2, 3);
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    cell.init(&mut store, &mut rng).unwrap();
    store.get_mut("gru.in.b").unwrap().data_mut().iter_mut().for_each(|v| *v = 0.1);
    let x = random(&mut rng, &[3, 2], 1.0);
    let mut g = Graph::new();
    let xv = g.constant(x);
    let h0 = g.constant(Tensor::zeros(&[1, 3]));
    let via_cell = cell.sequence(&mut g, &store, xv, Some(h0), false).unwrap();
    let names = cell.param_names();
    let params: Vec<Var> = names.iter().map(|n| g.param(&store, n).unwrap()).collect();
    let manual = run_cell(cell.dim, &mut g, &params, xv, h0).unwrap();
    assert_eq!(g.value(via_cell), g.value(manual));
}

#[test]
fn diamond_accumulates_fan_out() {
    // f(x) = Σ (3x + x²), reached through two branches from x.
    let mut g = Graph::new();
    let x = g.variable(mat(1, 3, &[1.0, -2.0, 0.5]));
    let a = g.scale(x, 3.0).unwrap();
    let b = g.mul(x, x).unwrap();
    let c = g.add(a, b).unwrap();
    let f = g.sum_all(c).unwrap();
    g.backward(f).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[5.0, -1.0, 4.0]);
}

#[test]
fn backward_requires_scalar() {
    let mut g = Graph::new();
    let x = g.variable(mat(1, 2, &[1.0, 2.0]));
    assert!(matches!(g.backward(x), Err(AutodiffError::NotScalar(_))));
}

#[test]
fn dense_layer_registers_params() {
    let layer = Dense::new("fc", 4, 2, true);
    let mut store = ParamStore::new();
    layer.init(&mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(store.get("fc.w").unwrap().shape(), &[2, 4]);
    assert_eq!(store.get("fc.b").unwrap().data(), &[0.0, 0.0]);
    let bound = 0.5;
    assert!(store.get("fc.w").unwrap().data().iter().all(|v| v.abs() <= bound));
    layer.check(&store).unwrap();
    assert!(Dense::new("fc", 3, 2, true).check(&store).is_err());
}

proptest! {
    #[test]
    fn losses_are_non_negative(
        a in prop::collection::vec(-10.0f64..10.0, 6),
        b in prop::collection::vec(-10.0f64..10.0, 6),
        dt in 0.01f64..1.0,
    ) {
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(3, 2, a).unwrap());
        let y = g.constant(Tensor::matrix(3, 2, b).unwrap());
        for l in [g.l1(x, y).unwrap(), g.mse(x, y).unwrap(), g.velocity_l1(x, y, dt).unwrap()] {
            prop_assert!(g.value(l).item() >= 0.0);
        }
        let same = g.l1(x, x).unwrap();
        prop_assert_eq!(g.value(same).item(), 0.0);
    }

    #[test]
    fn softmax_rows_are_distributions(v in prop::collection::vec(-30.0f64..30.0, 12)) {
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(3, 4, v).unwrap());
        let s = g.softmax_rows(x).unwrap();
        for r in 0..3 {
            let row = g.value(s).row(r);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
