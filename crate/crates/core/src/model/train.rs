//! Seeded minibatch training with MAE loss.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::split_count;
use crate::scalar::Scalar;

use super::layers::Layer;
use super::loss::mae_loss;
use super::matrix::Matrix;
use super::network::{Gradients, MlpRegressor, Mode, ModelError};

pub const DEFAULT_EPOCHS: usize = 700;
pub const DEFAULT_VALIDATION_SPLIT: f64 = 0.2;
pub const DEFAULT_BATCH_SIZE: usize = 16;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    GradientDescent,
    Adam,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::GradientDescent => "sgd",
            Optimizer::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(Optimizer::GradientDescent),
            "adam" => Some(Optimizer::Adam),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub epochs: usize,
    /// Fraction of the (shuffled) training rows held out for validation.
    pub validation_split: f64,
    pub batch_size: usize,
    pub learning_rate: T,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            validation_split: DEFAULT_VALIDATION_SPLIT,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: T::lit(DEFAULT_LEARNING_RATE),
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<(), TrainError<T>> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(0.0..1.0).contains(&self.validation_split) {
            return bad("validation_split must lie in [0, 1)");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }

    /// `key = value` pairs describing this configuration.
    pub fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("epochs".into(), self.epochs.to_string()),
            ("validation_split".into(), self.validation_split.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("learning_rate".into(), self.learning_rate.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("optimizer".into(), self.optimizer.name().into()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss<T> {
    pub epoch: usize,
    pub train_loss: T,
    /// `None` when no rows were held out.
    pub val_loss: Option<T>,
}

/// Held-out error of a trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestMetrics<T> {
    pub rows: usize,
    /// Mean absolute coordinate error in normalized units.
    pub normalized_mae: T,
    /// `normalized_mae * extent`.
    pub mae_ft: T,
    /// Mean Euclidean distance between predicted and true positions, in feet.
    pub mean_error_ft: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    pub epochs: Vec<EpochLoss<T>>,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub config: TrainConfig<T>,
    /// Inference-mode error on every row passed to training, filled by the pipeline.
    pub fit: Option<TestMetrics<T>>,
    pub test: Option<TestMetrics<T>>,
}

impl<T: Scalar> TrainReport<T> {
    pub fn final_train_loss(&self) -> Option<T> {
        self.epochs.last().map(|e| e.train_loss)
    }

    /// `epoch,train_loss,val_loss`, one line per epoch (empty val_loss when no validation rows).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", e.epoch, e.train_loss, val);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError<T: Scalar> {
    #[error("training data is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("loss became non-finite at epoch {epoch}")]
    DivergenceDetected { epoch: usize, report: Box<TrainReport<T>> },
}

struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

fn apply_update<T: Scalar>(
    model: &mut MlpRegressor<T>,
    grads: &Gradients<T>,
    config: &TrainConfig<T>,
    adam: &mut AdamState<T>,
) -> Result<(), ModelError> {
    let g = grads.flatten();
    let mut p = model.parameters();
    if g.len() != p.len() {
        return Err(ModelError::ShapeMismatch("gradient/parameter count".into()));
    }
    let lr = config.learning_rate;
    match config.optimizer {
        Optimizer::GradientDescent => {
            for (pi, gi) in p.iter_mut().zip(&g) {
                *pi -= lr * *gi;
            }
        }
        Optimizer::Adam => {
            let (b1, b2) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2));
            let eps = T::lit(ADAM_EPSILON);
            adam.step += 1;
            let c1 = T::one() - b1.powi(adam.step);
            let c2 = T::one() - b2.powi(adam.step);
            for i in 0..p.len() {
                adam.m[i] = b1 * adam.m[i] + (T::one() - b1) * g[i];
                adam.v[i] = b2 * adam.v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = adam.m[i] / c1;
                let vh = adam.v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
    model.set_parameters(&p)
}

/// Trains `model` in place.
///
/// The rows are shuffled once with `config.seed`; the last
/// `round(validation_split * N)` of that order are held out. Each epoch
/// reshuffles the remaining rows and runs minibatch updates, folding every
/// batch's statistics into the batch-norm running averages. The epoch's
/// train loss is the sample-weighted mean of its batch losses; validation
/// loss is measured in inference mode after the epoch.
pub fn train<T: Scalar>(
    model: &mut MlpRegressor<T>,
    inputs: &Matrix<T>,
    targets: &Matrix<T>,
    config: &TrainConfig<T>,
) -> Result<TrainReport<T>, TrainError<T>> {
    config.validate()?;
    if inputs.rows() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    if inputs.rows() != targets.rows() {
        return Err(ModelError::ShapeMismatch("input and target row counts differ".into()).into());
    }
    if inputs.cols() != model.input_width() || targets.cols() != model.output_width() {
        return Err(ModelError::ShapeMismatch("data width does not match model".into()).into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = inputs.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = split_count(n, config.validation_split).min(n - 1);
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let mut train_idx = train_idx.to_vec();
    let val_x = inputs.select_rows(val_idx);
    let val_y = targets.select_rows(val_idx);

    let mut report = TrainReport {
        epochs: Vec::with_capacity(config.epochs),
        train_rows: train_idx.len(),
        validation_rows: val_idx.len(),
        config: config.clone(),
        fit: None,
        test: None,
    };
    let n_params = model.parameter_count();
    let mut adam = AdamState {
        m: vec![T::zero(); n_params],
        v: vec![T::zero(); n_params],
        step: 0,
    };

    for epoch in 1..=config.epochs {
        train_idx.shuffle(&mut rng);
        let mut weighted = T::zero();
        for chunk in train_idx.chunks(config.batch_size) {
            let bx = inputs.select_rows(chunk);
            let by = targets.select_rows(chunk);
            let cache = model.forward_train(&bx)?;
            let loss = mae_loss(cache.output(), &by)?;
            if !loss.is_finite() {
                return Err(TrainError::DivergenceDetected {
                    epoch,
                    report: Box::new(report),
                });
            }
            weighted += loss * T::from_usize_lossy(chunk.len());
            let grads = model.backward(&cache, &by)?;
            model.update_running_stats(&cache);
            apply_update(model, &grads, config, &mut adam)?;
        }
        let train_loss = weighted / T::from_usize_lossy(train_idx.len());
        let val_loss = if val_idx.is_empty() {
            None
        } else {
            Some(mae_loss(&model.forward_batch(&val_x, Mode::Infer)?, &val_y)?)
        };
        let diverged = !train_loss.is_finite()
            || val_loss.is_some_and(|v| !v.is_finite())
            || !model.all_finite();
        report.epochs.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });
        if diverged {
            return Err(TrainError::DivergenceDetected {
                epoch,
                report: Box::new(report),
            });
        }
    }
    Ok(report)
}

/// Inference-mode error on normalized inputs/targets; `extent` converts to feet.
pub fn evaluate<T: Scalar>(
    model: &MlpRegressor<T>,
    inputs: &Matrix<T>,
    targets: &Matrix<T>,
    extent: T,
) -> Result<TestMetrics<T>, ModelError> {
    let pred = model.forward_batch(inputs, Mode::Infer)?;
    let normalized_mae = mae_loss(&pred, targets)?;
    let mut dist = T::zero();
    for s in 0..pred.rows() {
        let (p, t) = (pred.row(s), targets.row(s));
        let sq: T = p.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum();
        dist += sq.sqrt() * extent;
    }
    Ok(TestMetrics {
        rows: pred.rows(),
        normalized_mae,
        mae_ft: normalized_mae * extent,
        mean_error_ft: dist / T::from_usize_lossy(pred.rows()),
    })
}

/// Count of batch-norm layers, used by architecture checks.
pub fn batch_norm_layers<T: Scalar>(model: &MlpRegressor<T>) -> usize {
    model
        .layers()
        .iter()
        .filter(|l| matches!(l, Layer::BatchNorm(_)))
        .count()
}

