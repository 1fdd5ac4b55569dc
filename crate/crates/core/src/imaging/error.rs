use super::Shape;

#[derive(Debug, thiserror::Error)]
pub enum ImagingError {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: Shape, actual: Shape },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("perturbation is all zeros and cannot be rescaled")]
    DegeneratePerturbation,
    #[error("pixel value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("{kind} format error at byte {offset}: {message}")]
    Format {
        kind: &'static str,
        offset: u64,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ImagingError {
    pub(crate) fn shape(expected: Shape, actual: Shape) -> Self {
        ImagingError::Shape { expected, actual }
    }
}
