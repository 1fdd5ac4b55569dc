//! Universal perturbation training: projected gradient ascent on
//!
//! ```text
//! loss(p) = 1 − mean_i score(x_i + p) / a,    a = descriptor.score_hi
//! ```
//!
//! minimised with Adam and clipped to `[−clip, clip]` after every step.
//! Inputs are not clamped inside the loss.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AdamState, AttackError, ImageSource};
use crate::imaging::{Field, ImageTensor, ImagingError, Perturbation, DEFAULT_CLIP_BOUND, DEFAULT_TILE};
use crate::metrics::{MetricError, MetricHandle};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_bound: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Side of the square perturbation tile (and of the training images).
    pub tile: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            batch_size: 8,
            learning_rate: 0.001,
            clip_bound: DEFAULT_CLIP_BOUND,
            seed: 0,
            shuffle: true,
            tile: DEFAULT_TILE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |what: &str| Err(AttackError::Parameter(what.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(self.clip_bound.is_finite() && self.clip_bound > 0.0) {
            return bad("clip_bound must be > 0");
        }
        if self.tile == 0 {
            return bad("tile must be >= 1");
        }
        Ok(())
    }
}

/// One optimiser step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub batch: usize,
    /// Batch loss at the perturbation before the step.
    pub loss: f64,
    /// `max|p|` after the step and clip.
    pub max_abs_p: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub perturbation: Perturbation,
    pub log: Vec<TrainRecord>,
    /// Image-weighted mean loss per epoch.
    pub epoch_losses: Vec<f64>,
}

fn check_batch<T: AsRef<Field>>(batch: &[T], p: &Perturbation) -> Result<(), AttackError> {
    if batch.is_empty() {
        return Err(AttackError::Parameter("empty batch".into()));
    }
    for img in batch {
        img.as_ref().check_same_shape(p.field())?;
    }
    Ok(())
}

/// `1 − mean(score(x_i + p)) / a` without clamping the perturbed inputs.
pub fn uap_loss<T: AsRef<Field>>(
    m: &MetricHandle,
    batch: &[T],
    p: &Perturbation,
) -> Result<f64, AttackError> {
    check_batch(batch, p)?;
    let a = m.descriptor().score_hi;
    let mut total = 0.0;
    for img in batch {
        total += m.score(&img.as_ref().add(p.field())?)?;
    }
    Ok(1.0 - total / batch.len() as f64 / a)
}

/// The loss and its gradient with respect to `p`,
/// `−(1/a) · mean_i ∇score(x_i + p)`. Per-image work runs in parallel and
/// is reduced in batch order.
pub fn uap_loss_and_gradient<T: AsRef<Field> + Sync>(
    m: &MetricHandle,
    batch: &[T],
    p: &Perturbation,
) -> Result<(f64, Field), AttackError> {
    check_batch(batch, p)?;
    let a = m.descriptor().score_hi;
    let per_image: Vec<(f64, Field)> = batch
        .par_iter()
        .map(|img| -> Result<(f64, Field), AttackError> {
            let x = img.as_ref().add(p.field())?;
            Ok((m.score(&x)?, m.gradient(&x)?))
        })
        .collect::<Result<_, _>>()?;
    let n = batch.len() as f64;
    let mut score_sum = 0.0;
    let mut grad = vec![0.0; p.data().len()];
    for (s, g) in &per_image {
        score_sum += s;
        for (acc, v) in grad.iter_mut().zip(g.data()) {
            *acc += v;
        }
    }
    for v in grad.iter_mut() {
        *v *= -1.0 / (a * n);
    }
    Ok((1.0 - score_sum / n / a, Field::new(p.shape(), grad)?))
}

pub fn train_uap(
    m: &MetricHandle,
    dataset: &(impl ImageSource + ?Sized),
    cfg: &TrainConfig,
) -> Result<TrainOutcome, AttackError> {
    train_uap_observed(m, dataset, cfg, |_, _| {})
}

/// [`train_uap`] with a callback after every optimiser step, receiving the
/// step record and the clipped perturbation.
pub fn train_uap_observed(
    m: &MetricHandle,
    dataset: &(impl ImageSource + ?Sized),
    cfg: &TrainConfig,
    mut observer: impl FnMut(&TrainRecord, &Perturbation),
) -> Result<TrainOutcome, AttackError> {
    cfg.validate()?;
    if !m.descriptor().supports_gradient {
        return Err(MetricError::Capability(m.name().to_string()).into());
    }
    if dataset.is_empty() {
        return Err(AttackError::Parameter("training dataset is empty".into()));
    }
    let mut p = Perturbation::zeros(cfg.tile, cfg.tile, cfg.clip_bound)?;
    let mut adam = AdamState::new(p.data().len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut weighted_loss = 0.0;
        for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<ImageTensor> = chunk
                .par_iter()
                .map(|&i| dataset.load(i))
                .collect::<Result<_, _>>()?;
            let (loss, grad) = uap_loss_and_gradient(m, &batch, &p).map_err(|e| match e {
                AttackError::Imaging(ImagingError::Shape { expected, actual }) => {
                    AttackError::Parameter(format!(
                        "training image shape {actual} does not match the perturbation tile {expected}"
                    ))
                }
                other => other,
            })?;
            let mut step_err = None;
            p.update_and_clip(|params| {
                step_err = adam.step(params, grad.data(), cfg.learning_rate).err();
            });
            if let Some(e) = step_err {
                return Err(e);
            }
            let record = TrainRecord {
                epoch,
                batch: batch_index,
                loss,
                max_abs_p: p.max_abs(),
            };
            observer(&record, &p);
            log.push(record);
            weighted_loss += loss * batch.len() as f64;
        }
        epoch_losses.push(weighted_loss / dataset.len() as f64);
    }
    Ok(TrainOutcome {
        perturbation: p,
        log,
        epoch_losses,
    })
}

pub const TRAINING_LOG_HEADER: &str = "epoch,batch,loss,max_abs_p";

/// CSV with header `epoch,batch,loss,max_abs_p`.
pub fn write_training_log(mut w: impl Write, log: &[TrainRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRAINING_LOG_HEADER}")?;
    for r in log {
        writeln!(w, "{},{},{},{}", r.epoch, r.batch, r.loss, r.max_abs_p)?;
    }
    Ok(())
}
