//! Gain-versus-loss dependence and the stability score.

use serde::{Deserialize, Serialize};

use super::curve::interpolate;
use super::StabilityError;

/// Per-video outcome at one amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainLoss {
    pub target_gain: f64,
    /// Positive when the attack lowers proxy quality.
    pub proxy_loss: f64,
}

/// Video-averaged outcome at one amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependencePoint {
    pub amplitude: f64,
    pub proxy_loss: f64,
    pub target_gain: f64,
}

/// Average gains and losses over videos, one point per amplitude.
///
/// `cells[v][k]` is the outcome for video `v` at amplitude `k`; a `None`
/// anywhere is an incomplete grid.
pub fn build_dependence(
    metric: &str,
    videos: &[String],
    amplitudes: &[f64],
    cells: &[Vec<Option<GainLoss>>],
) -> Result<Vec<DependencePoint>, StabilityError> {
    if videos.is_empty() || amplitudes.is_empty() {
        return Err(StabilityError::Config("dependence needs at least one video and one amplitude".into()));
    }
    let hole = |v: usize, k: usize| StabilityError::IncompleteGrid {
        metric: metric.to_string(),
        video: videos.get(v).cloned().unwrap_or_else(|| format!("#{v}")),
        amplitude: amplitudes[k],
    };
    let n = videos.len() as f64;
    (0..amplitudes.len())
        .map(|k| {
            let mut gain = 0.0;
            let mut loss = 0.0;
            for v in 0..videos.len() {
                let cell = cells.get(v).and_then(|row| row.get(k)).copied().flatten().ok_or_else(|| hole(v, k))?;
                gain += cell.target_gain;
                loss += cell.proxy_loss;
            }
            Ok(DependencePoint { amplitude: amplitudes[k], proxy_loss: loss / n, target_gain: gain / n })
        })
        .collect()
}

/// Scores for a set of metrics over their common proxy-loss interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityScores {
    /// `[max of per-metric minimum loss, min of per-metric maximum loss]`.
    pub interval: [f64; 2],
    /// In input order.
    pub scores: Vec<f64>,
}

/// −100 × the area under each metric's gain-versus-loss polyline over the
/// loss interval on which every metric's dependence is defined.
///
/// Points are sorted by loss first. A zero-width interval (e.g. a single
/// amplitude level, or an attack that changes nothing) gives score 0.
pub fn stability_score(dependences: &[(String, Vec<DependencePoint>)]) -> Result<StabilityScores, StabilityError> {
    if dependences.is_empty() {
        return Err(StabilityError::Config("no metrics to score".into()));
    }
    let mut sorted = Vec::with_capacity(dependences.len());
    for (name, points) in dependences {
        if points.is_empty() {
            return Err(StabilityError::Config(format!("metric {name} has no dependence points")));
        }
        if points.iter().any(|p| !p.proxy_loss.is_finite() || !p.target_gain.is_finite()) {
            return Err(StabilityError::Config(format!("metric {name} has a non-finite dependence point")));
        }
        let mut knots: Vec<(f64, f64)> = points.iter().map(|p| (p.proxy_loss, p.target_gain)).collect();
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        sorted.push((name.as_str(), knots));
    }
    let lo = sorted.iter().map(|(_, k)| k[0].0).fold(f64::NEG_INFINITY, f64::max);
    let hi = sorted.iter().map(|(_, k)| k[k.len() - 1].0).fold(f64::INFINITY, f64::min);
    if lo > hi {
        let ranges = sorted
            .iter()
            .map(|(name, k)| format!("{name}: [{}, {}]", k[0].0, k[k.len() - 1].0))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(StabilityError::EmptyInterval(ranges));
    }
    let scores = sorted.iter().map(|(_, knots)| -area_on(knots, lo, hi)).map(|s| s + 0.0).collect();
    Ok(StabilityScores { interval: [lo, hi], scores })
}

/// ×100 trapezoidal area of the polyline over `[lo, hi]`.
fn area_on(knots: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let mut pts = Vec::with_capacity(knots.len() + 2);
    pts.push((lo, interpolate(knots.iter().copied(), lo)));
    pts.extend(knots.iter().filter(|k| k.0 > lo && k.0 < hi).copied());
    pts.push((hi, interpolate(knots.iter().copied(), hi)));
    pts.windows(2)
        .map(|w| {
            let dx = 100.0 * (w[1].0 - w[0].0);
            (dx * w[0].1 + dx * w[1].1) * 0.5
        })
        .sum()
}
