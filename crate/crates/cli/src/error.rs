//! Errors and the stable exit-code taxonomy.

use uapg::attack::AttackError;
use uapg::codec::CodecError;
use uapg::imaging::ImagingError;
use uapg::metrics::MetricError;
use uapg::stability::{CellFailure, StabilityError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const METRIC: i32 = 3;
    pub const GRID: i32 = 4;
    pub const CODEC: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("evaluation grid error: {0}")]
    Grid(String),
    #[error("codec error: {0}")]
    Codec(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Metric(_) => exit::METRIC,
            CliError::Grid(_) => exit::GRID,
            CliError::Codec(_) => exit::CODEC,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    /// Prefix the message with some context, keeping the category.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Metric(m) => CliError::Metric(format!("{what}: {m}")),
            CliError::Grid(m) => CliError::Grid(format!("{what}: {m}")),
            CliError::Codec(m) => CliError::Codec(format!("{what}: {m}")),
            CliError::Internal(m) => CliError::Internal(format!("{what}: {m}")),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Spec { .. } => CliError::Config(e.to_string()),
            _ => CliError::Metric(e.to_string()),
        }
    }
}

/// Bad input files and parameters are configuration problems.
impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Metric(m) => m.into(),
            AttackError::Imaging(i) => i.into(),
            AttackError::Parameter(_) | AttackError::Io(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::Spec(_) => CliError::Config(e.to_string()),
            _ => CliError::Codec(e.to_string()),
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        let message = e.to_string();
        match e {
            StabilityError::Config(_) => CliError::Config(message),
            StabilityError::Cell { source, .. } => match *source {
                CellFailure::Codec(_) => CliError::Codec(message),
                CellFailure::Metric(MetricError::Spec { .. }) => CliError::Config(message),
                CellFailure::Metric(_) => CliError::Metric(message),
                CellFailure::Imaging(_) => CliError::Grid(message),
            },
            StabilityError::InvalidCurve(_)
            | StabilityError::Degenerate(_)
            | StabilityError::NoOverlap(_)
            | StabilityError::IncompleteGrid { .. }
            | StabilityError::EmptyInterval(_) => CliError::Grid(message),
            StabilityError::Schema(_)
            | StabilityError::Cache(_)
            | StabilityError::Json(_)
            | StabilityError::Csv(_)
            | StabilityError::Io(_) => CliError::Internal(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(source: CellFailure) -> StabilityError {
        StabilityError::Cell {
            metric: "builtin:mean".into(),
            video: "clip".into(),
            amplitude: Some(0.04),
            rate: "mock:q=0.4".into(),
            source: Box::new(source),
        }
    }

    #[test]
    fn grid_errors_name_the_failing_cell() {
        let e = CliError::from(StabilityError::IncompleteGrid {
            metric: "builtin:mean".into(),
            video: "clip".into(),
            amplitude: 0.04,
        });
        assert_eq!(e.exit_code(), exit::GRID);
        let text = e.to_string();
        assert!(text.contains("builtin:mean") && text.contains("clip") && text.contains("0.04"), "{text}");
        assert_eq!(CliError::from(StabilityError::EmptyInterval("a: [0, 1]".into())).exit_code(), exit::GRID);
    }

    #[test]
    fn cell_failures_route_by_cause() {
        let codec = cell(CellFailure::Codec(CodecError::Output("no file".into())));
        assert_eq!(CliError::from(codec).exit_code(), exit::CODEC);
        let bridge = cell(CellFailure::Metric(MetricError::Bridge { message: "gone".into(), retryable: true }));
        let e = CliError::from(bridge);
        assert_eq!(e.exit_code(), exit::METRIC);
        assert!(e.to_string().contains("mock:q=0.4"), "{e}");
        let spec = cell(CellFailure::Metric(MetricError::Spec { spec: "x".into(), reason: "unknown".into() }));
        assert_eq!(CliError::from(spec).exit_code(), exit::CONFIG);
    }

    #[test]
    fn metric_and_codec_categories() {
        let spec = MetricError::Spec { spec: "builtin:nope".into(), reason: "unknown".into() };
        assert_eq!(CliError::from(spec).exit_code(), exit::CONFIG);
        assert_eq!(CliError::from(MetricError::Capability("m".into())).exit_code(), exit::METRIC);
        assert_eq!(CliError::from(CodecError::Spec("no {bitrate}".into())).exit_code(), exit::CONFIG);
        assert_eq!(CliError::from(AttackError::Parameter("steps".into())).exit_code(), exit::CONFIG);
        let io = std::io::Error::other("disk");
        assert_eq!(CliError::from(io).exit_code(), exit::INTERNAL);
    }

    #[test]
    fn context_keeps_the_category() {
        let e = CliError::Metric("down".into()).context("eval.metrics external:x");
        assert_eq!(e.exit_code(), exit::METRIC);
        assert_eq!(e.to_string(), "metric error: eval.metrics external:x: down");
    }
}
