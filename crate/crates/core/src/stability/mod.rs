//! Metric stability under universal perturbations.
//!
//! RD curves are built for every target metric × video × amplitude (plus the
//! unattacked baseline), normalised, reduced to per-amplitude gain/loss areas,
//! averaged into a gain-versus-loss dependence and finally integrated over the
//! proxy-loss range shared by all metrics.

mod cache;
mod curve;
mod dependence;
mod export;
mod pipeline;
mod report;
mod schema;

use crate::codec::CodecError;
use crate::imaging::ImagingError;
use crate::metrics::MetricError;

pub use cache::{CacheKey, CacheStats, ScoreCache};
pub use curve::{
    curve_area, gain, normalize_curves, normalize_proxy_curves, normalize_target_curves, normalize_with, Extrema,
    RDCurve, RdPoint,
};
pub use dependence::{build_dependence, stability_score, DependencePoint, GainLoss, StabilityScores};
pub use export::{write_csv_exports, CSV_DEPENDENCE, CSV_RD_POINTS, CSV_STABILITY};
pub use pipeline::{
    run_stability_pipeline, video_hash, EvalConfig, EvalVideo, PipelineOutcome, PipelineStats, TargetMetric,
    DEFAULT_AMPLITUDES,
};
pub use report::{
    assemble_report, CellOutcome, Conventions, MetricRuns, MetricSection, NormalizedRun, NormalizedSample,
    RawRun, RawSample, ReportInputs, StabilityReport, VideoInfo, REPORT_SCHEMA,
};
pub use schema::{report_schema, validate_report, REPORT_SCHEMA_JSON};

/// What failed inside one evaluation-grid cell.
#[derive(Debug, thiserror::Error)]
pub enum CellFailure {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Debug, thiserror::Error)]
pub enum StabilityError {
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("invalid RD curve {0}")]
    InvalidCurve(String),
    #[error("degenerate range: {0}")]
    Degenerate(String),
    #[error("no bitrate overlap: {0}")]
    NoOverlap(String),
    #[error("incomplete grid: no result for metric {metric}, video {video}, amplitude {amplitude}")]
    IncompleteGrid {
        metric: String,
        video: String,
        amplitude: f64,
    },
    #[error("empty common proxy-loss interval; per-metric loss ranges: {0}")]
    EmptyInterval(String),
    #[error("grid cell metric={metric} video={video} amplitude={} rate={rate}: {source}",
        amplitude.map_or("none".to_string(), |a| a.to_string()))]
    Cell {
        metric: String,
        video: String,
        amplitude: Option<f64>,
        rate: String,
        #[source]
        source: Box<CellFailure>,
    },
    #[error("score cache: {0}")]
    Cache(String),
    #[error("report does not match schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
