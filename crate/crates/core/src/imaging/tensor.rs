use std::ops::Deref;

use super::{Field, ImagingError, Shape};

/// An H×W×C raster (C ∈ {1, 3}) whose elements all lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor(Field);

impl ImageTensor {
    /// Validates range and channel count.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self, ImagingError> {
        Self::from_field(Field::new(shape, data)?)
    }

    pub fn from_field(field: Field) -> Result<Self, ImagingError> {
        check_channels(field.shape())?;
        if let Some((index, &value)) = field
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(ImagingError::OutOfRange { index, value });
        }
        Ok(ImageTensor(field))
    }

    /// Builds an image by clamping every element of `field` into `[0, 1]`.
    /// NaN maps to 0.
    pub fn clamped(field: Field) -> Result<Self, ImagingError> {
        check_channels(field.shape())?;
        let mut field = field;
        for v in field.data_mut() {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(ImageTensor(field))
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self, ImagingError> {
        Self::from_field(Field::filled(shape, value))
    }

    pub fn from_fn(
        shape: Shape,
        f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, ImagingError> {
        Self::from_field(Field::from_fn(shape, f))
    }

    pub fn as_field(&self) -> &Field {
        &self.0
    }

    pub fn into_field(self) -> Field {
        self.0
    }
}

impl Deref for ImageTensor {
    type Target = Field;

    fn deref(&self) -> &Field {
        &self.0
    }
}

impl AsRef<Field> for ImageTensor {
    fn as_ref(&self) -> &Field {
        &self.0
    }
}

fn check_channels(shape: Shape) -> Result<(), ImagingError> {
    if shape.channels != 1 && shape.channels != 3 {
        return Err(ImagingError::Parameter(format!(
            "images must have 1 or 3 channels, got {}",
            shape.channels
        )));
    }
    if shape.is_empty() {
        return Err(ImagingError::Parameter(format!("empty image {shape}")));
    }
    Ok(())
}

/// A non-empty sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFrames {
    frames: Vec<ImageTensor>,
    frame_rate: f64,
}

impl VideoFrames {
    pub fn new(frames: Vec<ImageTensor>, frame_rate: f64) -> Result<Self, ImagingError> {
        let first = frames
            .first()
            .ok_or_else(|| ImagingError::Parameter("video has no frames".into()))?
            .shape();
        if let Some(bad) = frames.iter().find(|f| f.shape() != first) {
            return Err(ImagingError::shape(first, bad.shape()));
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(ImagingError::Parameter(format!(
                "frame rate must be positive, got {frame_rate}"
            )));
        }
        Ok(VideoFrames { frames, frame_rate })
    }

    pub fn frames(&self) -> &[ImageTensor] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<ImageTensor> {
        self.frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn shape(&self) -> Shape {
        self.frames[0].shape()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.frame_rate
    }
}
