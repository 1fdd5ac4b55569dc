//! Per-image attack under an MSE budget: normalised gradient ascent on the
//! metric score, projected onto the MSE ball around the original image.

use super::AttackError;
use crate::imaging::{mse, Field, ImageTensor};
use crate::metrics::{EvalCount, MetricError, MetricHandle};

#[derive(Debug, Clone, PartialEq)]
pub struct MadcConfig {
    pub steps: usize,
    pub mse_budget: f64,
    pub step_size: f64,
}

impl MadcConfig {
    /// 1000 steps of size 0.001 under `mse_budget`.
    pub fn new(mse_budget: f64) -> Self {
        MadcConfig {
            steps: 1000,
            mse_budget,
            step_size: 0.001,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MadcOutcome {
    /// The best-scoring iterate (possibly the input itself).
    pub image: ImageTensor,
    pub initial_score: f64,
    pub final_score: f64,
    pub mse: f64,
    /// Set when the gradient vanished at the starting point.
    pub zero_gradient: bool,
    /// Metric evaluations spent by this call.
    pub evaluations: EvalCount,
}

/// Runs the attack. Each step costs one gradient and one score evaluation,
/// plus one score for the starting point: `2·steps + 1` in total.
pub fn madc_attack(m: &MetricHandle, img: &ImageTensor, cfg: &MadcConfig) -> Result<MadcOutcome, AttackError> {
    if !(cfg.mse_budget.is_finite() && cfg.mse_budget > 0.0) {
        return Err(AttackError::Parameter(format!(
            "mse_budget must be > 0, got {}",
            cfg.mse_budget
        )));
    }
    if !(cfg.step_size.is_finite() && cfg.step_size > 0.0) {
        return Err(AttackError::Parameter("step_size must be > 0".into()));
    }
    if !m.descriptor().supports_gradient {
        return Err(MetricError::Capability(m.name().to_string()).into());
    }
    let start = m.evaluations();
    let initial_score = m.score(img)?;
    let mut best = img.clone();
    let mut best_score = initial_score;
    let mut current = img.clone();
    let mut zero_gradient = false;

    for step in 0..cfg.steps {
        let g = m.gradient(&current)?;
        let norm = g.max_abs();
        if norm == 0.0 || !norm.is_finite() {
            zero_gradient = step == 0;
            break;
        }
        let scale = cfg.step_size / norm;
        let moved: Vec<f64> = current
            .data()
            .iter()
            .zip(g.data())
            .map(|(x, gv)| x + scale * gv)
            .collect();
        current = project(img, Field::new(img.shape(), moved)?, cfg.mse_budget)?;
        let s = m.score(&current)?;
        if s > best_score {
            best_score = s;
            best = current.clone();
        }
    }

    let end = m.evaluations();
    Ok(MadcOutcome {
        mse: mse(img, &best)?,
        image: best,
        initial_score,
        final_score: best_score,
        zero_gradient,
        evaluations: EvalCount {
            scores: end.scores - start.scores,
            gradients: end.gradients - start.gradients,
        },
    })
}

/// Radial projection onto `{x : mse(x, origin) ≤ budget}`, then clamp to
/// `[0, 1]` (clamping only shrinks the difference, so the bound survives).
fn project(origin: &ImageTensor, candidate: Field, budget: f64) -> Result<ImageTensor, AttackError> {
    let err = mse(origin, &candidate)?;
    if err <= budget {
        return Ok(ImageTensor::clamped(candidate)?);
    }
    let shrink = (budget / err).sqrt();
    let projected: Vec<f64> = origin
        .data()
        .iter()
        .zip(candidate.data())
        .map(|(o, c)| o + (c - o) * shrink)
        .collect();
    Ok(ImageTensor::clamped(Field::new(origin.shape(), projected)?)?)
}
