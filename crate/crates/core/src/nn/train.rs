use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::layers::argmax;
use super::model::{Model, ModelConfig, Precision};
use crate::data::{batches, Dataset, Normalization};
use crate::error::{Error, Result};
use crate::tensor::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub precision: Precision,
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            lr: 1e-3,
            weight_decay: 1e-5,
            seed: 0,
            precision: Precision::F32,
            eval_batch_size: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_batch_size == 0 {
            return Err(Error::config("batch sizes must be at least 1"));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::config(format!(
                "need lr > 0 and weight_decay ≥ 0, got {} and {}",
                self.lr, self.weight_decay
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetrics {
    pub model: String,
    pub seed: u64,
    pub train_size: usize,
    pub val_size: usize,
    pub parameters: usize,
    pub config: TrainConfig,
    pub normalization: Normalization,
    pub epochs: Vec<EpochMetrics>,
    pub final_val_acc: f64,
    pub wall_clock_seconds: f64,
}

impl RunMetrics {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,val_acc,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.3}",
                e.epoch, e.train_loss, e.train_acc, e.val_acc, e.seconds
            );
        }
        s
    }

    /// `metrics.csv` (one row per epoch) and `summary.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("metrics.csv");
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join("summary.json");
        fs::write(&json, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&json, e))
    }
}

/// Top-1 accuracy. Samples are scored independently so the result does not
/// depend on `batch_size`.
pub fn evaluate<T: Real>(model: &Model<T>, ds: &Dataset, batch_size: usize) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::config("batch size must be at least 1"));
    }
    if ds.is_empty() {
        return Err(Error::config("cannot evaluate on an empty dataset"));
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut correct = 0usize;
    for chunk in idx.chunks(batch_size) {
        let (x, labels) = ds.batch::<T>(chunk);
        let logits = model.logits(&x)?;
        let k = logits.shape()[1];
        for (i, &l) in labels.iter().enumerate() {
            let row: Vec<f64> = logits.data()[i * k..(i + 1) * k]
                .iter()
                .map(|v| v.as_f64())
                .collect();
            correct += (argmax(&row) == l) as usize;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// Adam on mini-batches reshuffled every epoch. The validation set is
/// standardised with the training statistics. `on_epoch` sees each epoch's
/// metrics as soon as they are known.
pub fn train<T: Real>(
    config: &ModelConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    tc: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Model<T>, RunMetrics)> {
    tc.validate()?;
    if train_set.class_count != config.num_classes || val_set.class_count != config.num_classes {
        return Err(Error::config(format!(
            "model has {} classes, data has {} (train) and {} (val)",
            config.num_classes, train_set.class_count, val_set.class_count
        )));
    }
    if train_set.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let val_set = val_set.clone().with_stats(train_set.stats);
    let mut model = Model::<T>::new(config.clone(), tc.seed)?;
    let adam = AdamConfig {
        lr: tc.lr,
        weight_decay: tc.weight_decay,
        ..Default::default()
    };
    let mut state = AdamState::new(adam, &model.parameters());
    let start = Instant::now();
    let mut history = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        let t0 = Instant::now();
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for idx in batches(
            train_set.len(),
            tc.batch_size,
            tc.seed.wrapping_add(1),
            epoch as u64,
        )? {
            let (x, labels) = train_set.batch::<T>(&idx);
            let step = model.loss_and_grads(&x, &labels)?;
            if !step.loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            loss_sum += step.loss * idx.len() as f64;
            correct += step.correct;
            adam_step(&mut model.parameters_mut(), &step.grads, &mut state)?;
        }
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_acc: if val_set.is_empty() {
                f64::NAN
            } else {
                evaluate(&model, &val_set, tc.eval_batch_size)?
            },
            seconds: t0.elapsed().as_secs_f64(),
        };
        on_epoch(&m);
        history.push(m);
    }
    let metrics = RunMetrics {
        model: config.name.clone(),
        seed: tc.seed,
        train_size: train_set.len(),
        val_size: val_set.len(),
        parameters: model.parameter_count(),
        config: tc.clone(),
        normalization: train_set.stats,
        final_val_acc: history.last().map_or(f64::NAN, |m| m.val_acc),
        epochs: history,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((model, metrics))
}
