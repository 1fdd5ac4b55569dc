//! Compressed variants of videos at controlled rates.
//!
//! [`CodecSpec::Mock`] is an in-process 8×8 DCT quantiser whose "bitrate" is
//! the empirical entropy of the quantised coefficients. [`CodecSpec::External`]
//! shells out to an encoder/decoder pair through command templates.

mod dct;
mod external;
mod mock;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::imaging::{ImagingError, VideoFrames};

pub use external::{external_encode_decode, split_template, ExternalCodec, SCRATCH_ENV};
pub use mock::{mock_encode_decode, quant_step, DELTA_MAX, DELTA_MIN};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("invalid codec spec: {0}")]
    Spec(String),
    #[error("{stage} command failed ({status}): {diagnostics}")]
    Command {
        stage: &'static str,
        status: String,
        diagnostics: String,
    },
    #[error("codec output unusable: {0}")]
    Output(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One rate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CodecSpec {
    Mock { quality: f64 },
    External(ExternalCodec),
}

impl CodecSpec {
    pub fn validate(&self) -> Result<(), CodecError> {
        match self {
            CodecSpec::Mock { quality } => {
                if !(*quality > 0.0 && *quality <= 1.0) {
                    return Err(CodecError::Spec(format!(
                        "mock quality must be in (0, 1], got {quality}"
                    )));
                }
                Ok(())
            }
            CodecSpec::External(ext) => ext.validate(),
        }
    }

    /// Short stable identifier, used in cache keys and reports.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CodecSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecSpec::Mock { quality } => write!(f, "mock:q={quality}"),
            CodecSpec::External(ext) => write!(
                f,
                "external:{}bps:{}|{}",
                ext.target_bitrate, ext.encode, ext.decode
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedResult {
    /// Decoded frames, same count and size as the input.
    pub video: VideoFrames,
    /// Bits per second.
    pub measured_bitrate: f64,
    pub codec_echo: String,
}

pub fn compress(video: &VideoFrames, spec: &CodecSpec) -> Result<CompressedResult, CodecError> {
    spec.validate()?;
    match spec {
        CodecSpec::Mock { quality } => mock_encode_decode(video, *quality),
        CodecSpec::External(ext) => external_encode_decode(video, ext),
    }
}
