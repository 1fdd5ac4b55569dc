use super::{contrast_mask, ContrastMask, Field, ImageTensor, ImagingError, Shape, VideoFrames};

/// Side length of the trained perturbation tile.
pub const DEFAULT_TILE: usize = 256;
/// Symmetric bound the trained perturbation is clipped to.
pub const DEFAULT_CLIP_BOUND: f64 = 0.1;

/// A trainable `tile_height × tile_width × 3` field with entries in
/// `[-clip_bound, clip_bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    field: Field,
    clip_bound: f64,
}

impl Perturbation {
    pub fn zeros(tile_height: usize, tile_width: usize, clip_bound: f64) -> Result<Self, ImagingError> {
        check_bound(clip_bound)?;
        if tile_height == 0 || tile_width == 0 {
            return Err(ImagingError::Parameter("tile dimensions must be positive".into()));
        }
        Ok(Perturbation {
            field: Field::zeros(Shape::new(tile_height, tile_width, 3)),
            clip_bound,
        })
    }

    /// Wraps `field`, rejecting entries outside the clip range.
    pub fn new(field: Field, clip_bound: f64) -> Result<Self, ImagingError> {
        check_bound(clip_bound)?;
        let shape = field.shape();
        if shape.channels != 3 || shape.is_empty() {
            return Err(ImagingError::Parameter(format!(
                "perturbation must be a non-empty 3-channel tile, got {shape}"
            )));
        }
        if let Some((index, &value)) = field
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= clip_bound))
        {
            return Err(ImagingError::Parameter(format!(
                "perturbation value {value} at index {index} exceeds clip bound {clip_bound}"
            )));
        }
        Ok(Perturbation { field, clip_bound })
    }

    /// Wraps `field` after clipping every entry into the clip range.
    pub fn clipped(mut field: Field, clip_bound: f64) -> Result<Self, ImagingError> {
        check_bound(clip_bound)?;
        for v in field.data_mut() {
            *v = v.clamp(-clip_bound, clip_bound);
        }
        Self::new(field, clip_bound)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn data(&self) -> &[f64] {
        self.field.data()
    }

    pub fn tile_height(&self) -> usize {
        self.field.shape().height
    }

    pub fn tile_width(&self) -> usize {
        self.field.shape().width
    }

    pub fn shape(&self) -> Shape {
        self.field.shape()
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    pub fn max_abs(&self) -> f64 {
        self.field.max_abs()
    }

    pub fn is_zero(&self) -> bool {
        self.field.data().iter().all(|&v| v == 0.0)
    }

    /// Mutates the raw values, then projects back onto the clip box.
    pub(crate) fn update_and_clip(&mut self, f: impl FnOnce(&mut [f64])) {
        let bound = self.clip_bound;
        let data = self.field.data_mut();
        f(data);
        for v in data.iter_mut() {
            *v = v.clamp(-bound, bound);
        }
    }
}

fn check_bound(clip_bound: f64) -> Result<(), ImagingError> {
    if !(clip_bound.is_finite() && clip_bound > 0.0) {
        return Err(ImagingError::Parameter(format!(
            "clip bound must be positive, got {clip_bound}"
        )));
    }
    Ok(())
}

/// Repeats the tile over a `height × width` canvas, cropping at the right and
/// bottom edges.
pub fn tile_perturbation(p: &Perturbation, height: usize, width: usize) -> Field {
    let (th, tw) = (p.tile_height(), p.tile_width());
    let tile = p.field();
    let out_shape = Shape::new(height, width, 3);
    if height == th && width == tw {
        return tile.clone();
    }
    let mut data = Vec::with_capacity(out_shape.len());
    for y in 0..height {
        let row = (y % th) * tw * 3;
        for x in 0..width {
            let start = row + (x % tw) * 3;
            data.extend_from_slice(&tile.data()[start..start + 3]);
        }
    }
    Field::new(out_shape, data).expect("tiled length matches shape")
}

/// Rescales `p` so that its largest absolute entry equals `amplitude`.
///
/// The result's clip bound is `amplitude`.
pub fn scale_to_amplitude(p: &Perturbation, amplitude: f64) -> Result<Perturbation, ImagingError> {
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(ImagingError::Parameter(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    let peak = p.max_abs();
    if peak == 0.0 {
        return Err(ImagingError::DegeneratePerturbation);
    }
    let factor = amplitude / peak;
    Perturbation::clipped(p.field().map(|v| v * factor), amplitude)
}

/// `clamp(img + mask ⊙ tile(p))`, the mask broadcast over channels.
pub fn apply_perturbation(
    img: &ImageTensor,
    p: &Perturbation,
    mask: Option<&ContrastMask>,
) -> Result<ImageTensor, ImagingError> {
    let shape = img.shape();
    if shape.channels != 3 {
        return Err(ImagingError::shape(
            Shape::new(shape.height, shape.width, 3),
            shape,
        ));
    }
    let tiled = tile_perturbation(p, shape.height, shape.width);
    let mut out = img.as_field().clone();
    match mask {
        None => {
            for (o, t) in out.data_mut().iter_mut().zip(tiled.data()) {
                *o += t;
            }
        }
        Some(mask) => {
            if mask.height() != shape.height || mask.width() != shape.width {
                return Err(ImagingError::shape(
                    Shape::new(shape.height, shape.width, 1),
                    Shape::new(mask.height(), mask.width(), 1),
                ));
            }
            for (i, (o, t)) in out.data_mut().iter_mut().zip(tiled.data()).enumerate() {
                *o += mask.data()[i / 3] * t;
            }
        }
    }
    ImageTensor::clamped(out)
}

/// Applies `p` frame by frame; with `mask_window`, each frame gets its own
/// contrast mask.
pub fn apply_to_video(
    video: &VideoFrames,
    p: &Perturbation,
    mask_window: Option<usize>,
) -> Result<VideoFrames, ImagingError> {
    let frames = video
        .frames()
        .iter()
        .map(|frame| match mask_window {
            Some(window) => {
                let mask = contrast_mask(frame, window)?;
                apply_perturbation(frame, p, Some(&mask))
            }
            None => apply_perturbation(frame, p, None),
        })
        .collect::<Result<Vec<_>, _>>()?;
    VideoFrames::new(frames, video.frame_rate())
}
