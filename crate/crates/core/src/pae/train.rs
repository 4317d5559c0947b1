use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss_rec, PaeConfig, PaeError, PaeModel};
use crate::autodiff::{AdamConfig, AutodiffError, Graph};
use crate::spectrum::extract_params;
use crate::Matrix;

/// Mean loss terms over one epoch's training windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub l1: f64,
    pub velocity: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn loss_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// CSV with columns `epoch, loss, l1, velocity`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "loss", "l1", "velocity"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.loss.to_string(),
                e.l1.to_string(),
                e.velocity.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seeds each phase head with the mean frequency its latent channel shows on
/// the data at initialization.
fn seed_phase_heads(model: &mut PaeModel, dataset: &[Matrix]) -> Result<(), PaeError> {
    let n = model.config().latent_channels;
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for w in dataset {
        let y = model.encode(w)?;
        for (i, (s, c)) in sums.iter_mut().zip(counts.iter_mut()).enumerate() {
            let p = extract_params(&y.column(i)).map_err(|e| PaeError::Shape(e.to_string()))?;
            if p.frequency > 0.0 {
                *s += p.frequency;
                *c += 1;
            }
        }
    }
    for i in 0..n {
        if counts[i] > 0 {
            model.set_phase_head(i, sums[i] / counts[i] as f64)?;
        }
    }
    Ok(())
}

pub fn train(dataset: &[Matrix], config: &PaeConfig) -> Result<(PaeModel, TrainLog), PaeError> {
    train_with_progress(dataset, config, |_| {})
}

/// Trains with Adam over shuffled mini-batches. `progress` sees each
/// epoch's statistics as soon as the epoch ends.
pub fn train_with_progress(
    dataset: &[Matrix],
    config: &PaeConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<(PaeModel, TrainLog), PaeError> {
    if dataset.is_empty() {
        return Err(PaeError::EmptyDataset);
    }
    let mut model = PaeModel::new(config.clone())?;
    for (i, w) in dataset.iter().enumerate() {
        if w.rows() != config.window || w.cols() != config.input_channels {
            return Err(PaeError::Shape(format!(
                "window {i} is {}×{}, expected {}×{}",
                w.rows(),
                w.cols(),
                config.window,
                config.input_channels
            )));
        }
        if !w.is_finite() {
            return Err(PaeError::NonFiniteInput(i));
        }
    }
    seed_phase_heads(&mut model, dataset)?;
    let adam = AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    };
    let dt = 1.0 / config.fps;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut l1_sum, mut vel_sum) = (0.0, 0.0, 0.0);
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            model.params_mut().zero_grads();
            for &i in idx {
                let mut g = Graph::new();
                let x = g.constant((&dataset[i]).into());
                // The graph refuses non-finite values, so an overflow anywhere
                // in the forward pass surfaces here as a NonFinite error.
                let l = match model
                    .forward_graph(&mut g, x)
                    .and_then(|f| Ok(loss_rec(&mut g, x, f.output, config.velocity_weight, dt)?))
                {
                    Ok(l) => l,
                    Err(PaeError::Autodiff(AutodiffError::NonFinite(_))) => {
                        return Err(PaeError::NonFiniteLoss { epoch, batch })
                    }
                    Err(e) => return Err(e),
                };
                let total = g.value(l.total).item();
                loss_sum += total;
                l1_sum += g.value(l.l1).item();
                vel_sum += g.value(l.velocity).item();
                let scaled = g.scale(l.total, 1.0 / idx.len() as f64)?;
                g.backward(scaled)?;
                model.params_mut().accumulate(&g);
            }
            model
                .params_mut()
                .adam_step(&adam)
                .map_err(|e| PaeError::Optimizer { epoch, batch, source: e })?;
        }
        let n = dataset.len() as f64;
        let stats = EpochStats {
            epoch,
            loss: loss_sum / n,
            l1: l1_sum / n,
            velocity: vel_sum / n,
        };
        progress(&stats);
        log.epochs.push(stats);
    }
    Ok((model, log))
}

/// Mean reconstruction L1 of a model over a dataset.
pub fn mean_reconstruction_l1(model: &PaeModel, dataset: &[Matrix]) -> Result<f64, PaeError> {
    if dataset.is_empty() {
        return Err(PaeError::EmptyDataset);
    }
    let mut sum = 0.0;
    for w in dataset {
        sum += model.evaluate(w)?.1;
    }
    Ok(sum / dataset.len() as f64)
}
