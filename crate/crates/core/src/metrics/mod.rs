//! Metric abstraction, built-in differentiable toy metrics and the external
//! metric bridge client.
//!
//! Every scorer is reached through a [`MetricHandle`], which also keeps an
//! evaluation count so callers can account for attack cost.

mod bridge;
mod builtin;
mod finite_diff;
mod tinyconv;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::imaging::{Field, ImagingError, VideoFrames};

pub use bridge::{decode_field, encode_field, ExternalMetric, WireImage};
pub use builtin::{LinearScorer, MeanScorer, NoiseGuardScorer};
pub use finite_diff::finite_diff_gradient;
pub use tinyconv::{TinyConvParams, TinyConvScorer};

/// A raster of ∂score/∂pixel values, shaped like the scored input.
pub type GradientField = Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    BuiltIn,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDescriptor {
    pub name: String,
    pub score_lo: f64,
    /// Nominal maximum; also the normalisation factor of the UAP loss.
    pub score_hi: f64,
    pub supports_gradient: bool,
    pub kind: MetricKind,
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("metric {0} does not provide gradients")]
    Capability(String),
    #[error("bridge error{}: {message}", if *.retryable { " (retryable)" } else { "" })]
    Bridge { message: String, retryable: bool },
    #[error("invalid metric spec {spec:?}: {reason}")]
    Spec { spec: String, reason: String },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// A quality scorer.
///
/// Inputs are unconstrained fields: the training loss and the
/// finite-difference oracle evaluate metrics on values outside `[0, 1]`.
pub trait Metric: Send + Sync {
    fn descriptor(&self) -> &MetricDescriptor;

    fn score(&self, x: &Field) -> Result<f64, MetricError>;

    fn gradient(&self, x: &Field) -> Result<GradientField, MetricError> {
        let _ = x;
        Err(MetricError::Capability(self.descriptor().name.clone()))
    }
}

#[derive(Debug, Default)]
struct EvalCounters {
    scores: AtomicU64,
    gradients: AtomicU64,
}

/// Snapshot of a handle's evaluation counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalCount {
    pub scores: u64,
    pub gradients: u64,
}

impl EvalCount {
    pub fn total(&self) -> u64 {
        self.scores + self.gradients
    }
}

/// Shared, counted access to a metric. Clones share the counters.
#[derive(Clone)]
pub struct MetricHandle {
    metric: Arc<dyn Metric>,
    counters: Arc<EvalCounters>,
}

impl fmt::Debug for MetricHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricHandle")
            .field("descriptor", self.descriptor())
            .field("evaluations", &self.evaluations())
            .finish()
    }
}

impl MetricHandle {
    pub fn new(metric: impl Metric + 'static) -> Self {
        MetricHandle {
            metric: Arc::new(metric),
            counters: Arc::default(),
        }
    }

    pub fn descriptor(&self) -> &MetricDescriptor {
        self.metric.descriptor()
    }

    pub fn name(&self) -> &str {
        &self.descriptor().name
    }

    pub fn score(&self, x: &Field) -> Result<f64, MetricError> {
        self.counters.scores.fetch_add(1, Ordering::Relaxed);
        self.metric.score(x)
    }

    pub fn score_batch<T: AsRef<Field>>(&self, batch: &[T]) -> Result<Vec<f64>, MetricError> {
        if let Some(first) = batch.first() {
            let shape = first.as_ref().shape();
            if let Some(bad) = batch.iter().find(|x| x.as_ref().shape() != shape) {
                return Err(ImagingError::Shape {
                    expected: shape,
                    actual: bad.as_ref().shape(),
                }
                .into());
            }
        }
        batch.iter().map(|x| self.score(x.as_ref())).collect()
    }

    pub fn gradient(&self, x: &Field) -> Result<GradientField, MetricError> {
        if !self.descriptor().supports_gradient {
            return Err(MetricError::Capability(self.name().to_string()));
        }
        self.counters.gradients.fetch_add(1, Ordering::Relaxed);
        let g = self.metric.gradient(x)?;
        x.check_same_shape(&g)?;
        Ok(g)
    }

    /// Unweighted mean of per-frame scores.
    pub fn score_video(&self, video: &VideoFrames) -> Result<f64, MetricError> {
        let scores = self.score_batch(video.frames())?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    }

    pub fn evaluations(&self) -> EvalCount {
        EvalCount {
            scores: self.counters.scores.load(Ordering::Relaxed),
            gradients: self.counters.gradients.load(Ordering::Relaxed),
        }
    }

    pub fn reset_evaluations(&self) {
        self.counters.scores.store(0, Ordering::Relaxed);
        self.counters.gradients.store(0, Ordering::Relaxed);
    }
}

/// The built-in metrics, in a fixed order.
pub fn builtin_registry() -> Vec<MetricHandle> {
    vec![
        MetricHandle::new(MeanScorer::new()),
        MetricHandle::new(LinearScorer::new()),
        MetricHandle::new(TinyConvScorer::new()),
        MetricHandle::new(NoiseGuardScorer::new()),
    ]
}

/// Looks a built-in metric up by name (`MeanScorer`) or short alias (`mean`),
/// case-insensitively.
pub fn builtin(name: &str) -> Option<MetricHandle> {
    let lower = name.to_ascii_lowercase();
    let canonical = match lower.as_str() {
        "mean" => "meanscorer",
        "linear" => "linearscorer",
        "tinyconv" => "tinyconvscorer",
        "noiseguard" => "noiseguardscorer",
        other => other,
    };
    builtin_registry()
        .into_iter()
        .find(|m| m.name().to_ascii_lowercase() == canonical)
}

/// Resolves `builtin:<name>` or `external:<command line>`.
pub fn parse_metric_spec(spec: &str) -> Result<MetricHandle, MetricError> {
    let bad = |reason: &str| MetricError::Spec {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    match spec.split_once(':') {
        Some(("builtin", name)) => builtin(name.trim()).ok_or_else(|| bad("unknown built-in metric")),
        Some(("external", command)) if !command.trim().is_empty() => {
            Ok(MetricHandle::new(ExternalMetric::spawn(command.trim())?))
        }
        Some(("external", _)) => Err(bad("empty command line")),
        _ => Err(bad("expected builtin:<name> or external:<command>")),
    }
}
