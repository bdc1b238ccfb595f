use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{batch_loss_and_gradient, loss, ChannelScale, LstmNetwork, NetworkConfig, Normalization, Parameters};
use super::resample::Matrix;
use super::LstmError;

/// One input/target pair in physical units, channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub inputs: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch (normalized units).
    pub train_mse: f64,
    /// Validation loss after the epoch's last update (normalized units).
    pub validation_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_validation_mse: f64,
}

/// Stops once the monitored loss has gone `patience` consecutive epochs
/// without dropping at least `min_improvement` (relative) below the last
/// loss that did.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    min_improvement: f64,
    reference: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_improvement: f64) -> Self {
        Self {
            patience,
            min_improvement,
            reference: None,
            stale: 0,
        }
    }

    /// Record one epoch's loss; true when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        match self.reference {
            Some(r) if loss > r * (1.0 - self.min_improvement) => self.stale += 1,
            _ => {
                self.reference = Some(loss);
                self.stale = 0;
            }
        }
        self.stale >= self.patience
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: i32,
    m: Parameters,
    v: Parameters,
}

impl Adam {
    pub fn new(params: &Parameters, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn step(&mut self, params: &mut Parameters, grad: &Parameters) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let g = grad.tensors();
        let m = self.m.tensors_mut();
        let v = self.v.tensors_mut();
        for (((p, (_, g)), m), v) in params.tensors_mut().into_iter().zip(g).zip(m).zip(v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

fn fit_normalization(samples: &[TrainingSample], cfg: &NetworkConfig) -> Normalization {
    let inputs = (0..cfg.input_channels)
        .map(|c| ChannelScale::fit(samples.iter().map(move |s| s.inputs[c].as_slice())))
        .collect();
    let targets = (0..cfg.output_channels)
        .map(|c| ChannelScale::fit(samples.iter().map(move |s| s.target[c].as_slice())))
        .collect();
    Normalization { inputs, targets }
}

fn prepare(net: &LstmNetwork, samples: &[TrainingSample]) -> Result<Vec<(Matrix, Matrix)>, LstmError> {
    samples
        .iter()
        .map(|s| {
            let inputs: Vec<&[f64]> = s.inputs.iter().map(|v| v.as_slice()).collect();
            let target: Vec<&[f64]> = s.target.iter().map(|v| v.as_slice()).collect();
            let x = net.prepare_inputs(&inputs)?;
            let y = net.prepare_targets(&target)?;
            if x.rows() != y.rows() {
                return Err(LstmError::Shape(format!(
                    "input yields {} steps, target {}",
                    x.rows(),
                    y.rows()
                )));
            }
            Ok((x, y))
        })
        .collect()
}

fn check_channels(samples: &[TrainingSample], cfg: &NetworkConfig) -> Result<(), LstmError> {
    for (i, s) in samples.iter().enumerate() {
        if s.inputs.len() != cfg.input_channels || s.target.len() != cfg.output_channels {
            return Err(LstmError::Shape(format!(
                "sample {i} has {} input and {} target channels",
                s.inputs.len(),
                s.target.len()
            )));
        }
    }
    Ok(())
}

/// [`train_with_observer`] without a progress callback.
pub fn train(
    train_set: &[TrainingSample],
    validation_set: &[TrainingSample],
    cfg: &NetworkConfig,
) -> Result<(LstmNetwork, TrainingHistory), LstmError> {
    train_with_observer(train_set, validation_set, cfg, |_| {})
}

/// Mini-batch Adam on the batch-mean MSE in normalized units. Normalization
/// is fitted on `train_set`. Stops at `max_epochs` or when the training loss
/// plateaus, and returns the parameters with the lowest validation loss.
pub fn train_with_observer(
    train_set: &[TrainingSample],
    validation_set: &[TrainingSample],
    cfg: &NetworkConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<(LstmNetwork, TrainingHistory), LstmError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(LstmError::Empty("training set".into()));
    }
    if validation_set.is_empty() {
        return Err(LstmError::Empty("validation set".into()));
    }
    check_channels(train_set, cfg)?;
    check_channels(validation_set, cfg)?;

    let mut net = LstmNetwork::new(cfg.clone())?;
    net.normalization = fit_normalization(train_set, cfg);
    let train_data = prepare(&net, train_set)?;
    let val_data = prepare(&net, validation_set)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(1);
    let mut adam = Adam::new(&net.params, cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience_epochs, cfg.min_improvement_fraction);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut best = (net.params.clone(), 0usize, f64::INFINITY);
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Matrix, &Matrix)> = chunk.iter().map(|&i| (&train_data[i].0, &train_data[i].1)).collect();
            let (l, grad) = batch_loss_and_gradient(&net.params, &batch)?;
            if !l.is_finite() || !grad.is_finite() {
                return Err(LstmError::Divergence { epoch });
            }
            adam.step(&mut net.params, &grad);
            total += l * chunk.len() as f64;
        }
        let train_mse = total / train_data.len() as f64;
        let val_losses = val_data
            .par_iter()
            .map(|(x, y)| loss(&net.params, x, y))
            .collect::<Result<Vec<_>, _>>()?;
        let validation_mse = val_losses.iter().sum::<f64>() / val_losses.len() as f64;
        if !validation_mse.is_finite() || !net.params.is_finite() {
            return Err(LstmError::Divergence { epoch });
        }
        if validation_mse < best.2 {
            best = (net.params.clone(), epoch, validation_mse);
        }
        let record = EpochRecord {
            epoch,
            train_mse,
            validation_mse,
        };
        observer(&record);
        epochs.push(record);
        if stopper.observe(train_mse) {
            stop_reason = StopReason::Plateau;
            break;
        }
    }
    net.params = best.0;
    Ok((
        net,
        TrainingHistory {
            epochs,
            stop_reason,
            best_epoch: best.1,
            best_validation_mse: best.2,
        },
    ))
}
