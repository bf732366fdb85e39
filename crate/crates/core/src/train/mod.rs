//! L1 + Adam training with a step-halving learning rate.

mod optim;

pub use optim::{adam_step, lr_schedule, AdamConfig, OptimizerState};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::autodiff::{Graph, Tape};
use crate::data::{BatchLoader, DataError, TrainingPair};
use crate::model::{save_checkpoint, AwsrnModel, CheckpointError};
use crate::tensor::{Element, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss {value} at iteration {iteration}")]
    NonFiniteLoss { iteration: u64, value: f64 },
    #[error("no gradient for trainable parameter `{0}`")]
    MissingGradient(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub halve_every: u64,
    pub batch: usize,
    pub patch: usize,
    pub adam: AdamConfig,
    pub max_iters: u64,
    pub seed: u64,
    /// Write a checkpoint every this many iterations (0 disables).
    pub checkpoint_every: u64,
    pub checkpoint_path: Option<PathBuf>,
    /// Sampling threads; 0 samples on the training thread.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-3,
            halve_every: 200_000,
            batch: 16,
            patch: 48,
            adam: AdamConfig::default(),
            max_iters: 1000,
            seed: 0,
            checkpoint_every: 0,
            checkpoint_path: None,
            workers: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be positive");
        }
        if self.halve_every == 0 || self.batch == 0 || self.patch == 0 {
            return bad("halve_every, batch and patch must be positive");
        }
        for b in [self.adam.beta1, self.adam.beta2] {
            if !(b > 0.0 && b < 1.0) {
                return bad("adam betas must lie in (0, 1)");
            }
        }
        if !(self.adam.eps > 0.0) {
            return bad("adam eps must be positive");
        }
        if self.checkpoint_every > 0 && self.checkpoint_path.is_none() {
            return bad("checkpoint_every needs a checkpoint path");
        }
        Ok(())
    }

    pub fn learning_rate(&self, t: u64) -> f64 {
        lr_schedule(self.lr0, self.halve_every, t)
    }
}

/// Per-iteration training losses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub losses: Vec<f64>,
}

/// L1 loss of one batch through the tape. Returns the tape, the loss node and its value.
pub fn batch_loss<T: Element>(
    model: &AwsrnModel<T>,
    lr: &Tensor<T>,
    hr: &Tensor<T>,
) -> Result<(Tape<T>, crate::autodiff::Var, f64), TensorError> {
    let mut tape = Tape::new();
    let x = tape.input(lr.clone());
    let target = tape.input(hr.clone());
    let pred = model.forward(&mut tape, &x)?;
    let loss = tape.l1_loss(&pred, &target)?;
    let value = tape.value(&loss).item().to_f64();
    Ok((tape, loss, value))
}

pub fn train<T: Element>(
    model: &mut AwsrnModel<T>,
    pairs: Arc<Vec<TrainingPair>>,
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    train_with_progress(model, pairs, cfg, |_, _, _| {})
}

/// Runs `sample -> forward -> L1 -> backward -> Adam -> zero grads` for `max_iters` steps.
/// `progress` sees the iteration, its loss and the updated model.
pub fn train_with_progress<T: Element>(
    model: &mut AwsrnModel<T>,
    pairs: Arc<Vec<TrainingPair>>,
    cfg: &TrainConfig,
    mut progress: impl FnMut(u64, f64, &AwsrnModel<T>),
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let mut report = TrainReport::default();
    if cfg.max_iters == 0 {
        return Ok(report);
    }
    let mut loader = BatchLoader::<T>::new(pairs, cfg.seed, cfg.patch, cfg.batch, cfg.workers)?;
    let mut state = OptimizerState::new();
    for t in 0..cfg.max_iters {
        let batch = loader.next_batch()?;
        let (tape, loss, value) = batch_loss(model, &batch.lr, &batch.hr)?;
        if !value.is_finite() {
            return Err(TrainError::NonFiniteLoss { iteration: t, value });
        }
        tape.backward(&loss, model.params_mut())?;
        adam_step(model.params_mut(), &mut state, cfg.learning_rate(t), &cfg.adam)?;
        model.params_mut().zero_grad();
        report.losses.push(value);
        progress(t, value, model);
        if cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0 {
            if let Some(path) = &cfg.checkpoint_path {
                save_checkpoint(model, path)?;
            }
        }
    }
    Ok(report)
}

/// Formats a loss trace as `iteration loss` lines.
pub fn format_loss_trace(losses: &[f64]) -> String {
    let mut out = String::with_capacity(losses.len() * 24);
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{i} {l:e}");
    }
    out
}

pub fn write_loss_trace(path: impl AsRef<Path>, losses: &[f64]) -> Result<(), TrainError> {
    fs::write(path, format_loss_trace(losses))?;
    Ok(())
}

/// Moving average with window `w` (entry `i` averages `i-w+1..=i`).
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    if w == 0 || xs.len() < w {
        return Vec::new();
    }
    xs.windows(w).map(|s| s.iter().sum::<f64>() / w as f64).collect()
}
