use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss_face, loss_gesture, loss_total, GeneratorModel, HierConfig, HierError, PairedDataset, PseudoParams};
use crate::autodiff::{AdamConfig, AutodiffError, Graph};

/// Mean loss terms over one pass through the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HierEpochStats {
    pub epoch: usize,
    /// Training objective: face loss plus `total`.
    pub loss: f64,
    pub face: f64,
    pub gesture: f64,
    /// Parameter-matching term, zero with the enhancer disabled.
    pub param: f64,
    /// Gesture loss plus the weighted parameter term.
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HierTrainLog {
    pub epochs: Vec<HierEpochStats>,
}

impl HierTrainLog {
    pub fn loss_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn total_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.total).collect()
    }

    /// CSV with columns `epoch, loss, face, gesture, param, total`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "loss", "face", "gesture", "param", "total"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.loss.to_string(),
                e.face.to_string(),
                e.gesture.to_string(),
                e.param.to_string(),
                e.total.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct WindowLoss {
    objective: f64,
    face: f64,
    gesture: f64,
    param: f64,
    total: f64,
}

/// Builds the objective of window `i`; backpropagates scaled by `scale`
/// when it is given.
fn window_loss(
    model: &GeneratorModel,
    data: &PairedDataset,
    pseudo: &PseudoParams,
    i: usize,
    backward_scale: Option<f64>,
) -> Result<(WindowLoss, Option<Graph>), HierError> {
    let cfg = model.config();
    let mut g = Graph::new();
    let f = model.forward_graph(&mut g, &data.conditioning[i], cfg.teacher_forcing)?;
    let face_t = g.constant((&data.face[i]).into());
    let body_t = g.constant((&data.body[i]).into());
    let hand_t = g.constant((&data.hand[i]).into());
    let face = loss_face(&mut g, face_t, f.face, cfg.face_mse_weight, cfg.face_velocity_weight)?;
    let ges = loss_gesture(&mut g, body_t, hand_t, f.body, f.hand, cfg.velocity_weight, 1.0 / cfg.fps)?;
    let pred = f.moe.as_ref().map(|m| m.params);
    let tl = loss_total(&mut g, ges.total, pred.as_ref(), pseudo, cfg.param_weight)?;
    let objective = g.add(face, tl.total)?;
    let value = |v| g.value(v).item();
    let out = WindowLoss {
        objective: value(objective),
        face: value(face),
        gesture: value(ges.total),
        param: tl.param.map_or(0.0, value),
        total: value(tl.total),
    };
    match backward_scale {
        Some(s) => {
            let scaled = g.scale(objective, s)?;
            g.backward(scaled)?;
            Ok((out, Some(g)))
        }
        None => Ok((out, None)),
    }
}

fn check_data(data: &PairedDataset, pseudo: &[PseudoParams], config: &HierConfig) -> Result<(), HierError> {
    if data.is_empty() {
        return Err(HierError::EmptyDataset);
    }
    if pseudo.len() != data.len() {
        return Err(HierError::Shape(format!("{} pseudo labels for {} windows", pseudo.len(), data.len())));
    }
    for (i, c) in data.conditioning.iter().enumerate() {
        c.validate(config)?;
        let t = c.frames();
        let shapes = [
            (&data.face[i], super::FACE_DIM),
            (&data.body[i], super::BODY_DIM),
            (&data.hand[i], super::HAND_DIM),
        ];
        for (m, w) in shapes {
            if m.rows() != t || m.cols() != w {
                return Err(HierError::Shape(format!("window {i}: target is {}×{}", m.rows(), m.cols())));
            }
            if !m.is_finite() {
                return Err(HierError::NonFiniteInput(i));
            }
        }
        if pseudo[i].channels() != config.latent_channels {
            return Err(HierError::Shape(format!(
                "window {i}: {} pseudo channels, expected {}",
                pseudo[i].channels(),
                config.latent_channels
            )));
        }
    }
    Ok(())
}

pub fn train_generator(
    data: &PairedDataset,
    pseudo: &[PseudoParams],
    config: &HierConfig,
) -> Result<(GeneratorModel, HierTrainLog), HierError> {
    train_generator_with_progress(data, pseudo, config, |_| {})
}

/// Trains all parts jointly with Adam over shuffled mini-batches.
pub fn train_generator_with_progress(
    data: &PairedDataset,
    pseudo: &[PseudoParams],
    config: &HierConfig,
    mut progress: impl FnMut(&HierEpochStats),
) -> Result<(GeneratorModel, HierTrainLog), HierError> {
    let mut model = GeneratorModel::new(config.clone())?;
    check_data(data, pseudo, config)?;
    let adam = AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = HierTrainLog::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 5];
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            model.params_mut().zero_grads();
            for &i in idx {
                let (l, g) = match window_loss(&model, data, &pseudo[i], i, Some(1.0 / idx.len() as f64)) {
                    Ok(r) => r,
                    Err(HierError::Autodiff(AutodiffError::NonFinite(_))) => {
                        return Err(HierError::NonFiniteLoss { epoch, batch })
                    }
                    Err(e) => return Err(e),
                };
                for (s, v) in sums.iter_mut().zip([l.objective, l.face, l.gesture, l.param, l.total]) {
                    *s += v;
                }
                model.params_mut().accumulate(&g.expect("backward graph"));
            }
            model
                .params_mut()
                .adam_step(&adam)
                .map_err(|e| HierError::Optimizer { epoch, batch, source: e })?;
        }
        let n = data.len() as f64;
        let stats = HierEpochStats {
            epoch,
            loss: sums[0] / n,
            face: sums[1] / n,
            gesture: sums[2] / n,
            param: sums[3] / n,
            total: sums[4] / n,
        };
        progress(&stats);
        log.epochs.push(stats);
    }
    Ok((model, log))
}

/// Mean loss terms of a model over a dataset, without updating it.
pub fn evaluate_generator(
    model: &GeneratorModel,
    data: &PairedDataset,
    pseudo: &[PseudoParams],
) -> Result<HierEpochStats, HierError> {
    check_data(data, pseudo, model.config())?;
    let mut sums = [0.0; 5];
    for (i, p) in pseudo.iter().enumerate() {
        let (l, _) = window_loss(model, data, p, i, None)?;
        for (s, v) in sums.iter_mut().zip([l.objective, l.face, l.gesture, l.param, l.total]) {
            *s += v;
        }
    }
    let n = data.len() as f64;
    Ok(HierEpochStats {
        epoch: 0,
        loss: sums[0] / n,
        face: sums[1] / n,
        gesture: sums[2] / n,
        param: sums[3] / n,
        total: sums[4] / n,
    })
}
