use super::{luminance, Field, ImageTensor, ImagingError};

pub const DEFAULT_MASK_WINDOW: usize = 7;

/// Per-pixel weights in `[0, 1]` used to modulate a perturbation by local
/// image contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMask {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ContrastMask {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, ImagingError> {
        if data.len() != height * width {
            return Err(ImagingError::Parameter(format!(
                "mask data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ImagingError::Parameter("mask values must lie in [0, 1]".into()));
        }
        Ok(ContrastMask {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        ContrastMask {
            height,
            width,
            data: vec![value.clamp(0.0, 1.0); height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Below this peak the image is treated as having no contrast at all.
const FLAT_THRESHOLD: f64 = 1e-12;

/// Local-contrast mask: windowed standard deviation of Rec. 601 luminance
/// (edge-replicated borders), rescaled so the maximum is 1.
pub fn contrast_mask(img: &ImageTensor, window: usize) -> Result<ContrastMask, ImagingError> {
    let shape = img.shape();
    if window < 3 || window.is_multiple_of(2) || window > shape.height.min(shape.width) {
        return Err(ImagingError::Parameter(format!(
            "mask window must be odd, >= 3 and <= {}, got {window}",
            shape.height.min(shape.width)
        )));
    }
    let std = local_std(&luminance(img), window);
    let peak = std.iter().fold(0.0f64, |m, &v| m.max(v));
    let data = if peak <= FLAT_THRESHOLD {
        vec![0.0; std.len()]
    } else {
        std.iter().map(|v| (v / peak).min(1.0)).collect()
    };
    ContrastMask::new(shape.height, shape.width, data)
}

/// Two-pass windowed population standard deviation over a single-channel
/// plane, borders replicated.
pub(crate) fn local_std(plane: &Field, window: usize) -> Vec<f64> {
    let (h, w) = (plane.shape().height, plane.shape().width);
    let r = (window / 2) as isize;
    let n = (window * window) as f64;
    let sample = |y: isize, x: isize| {
        let yy = y.clamp(0, h as isize - 1) as usize;
        let xx = x.clamp(0, w as isize - 1) as usize;
        plane.data()[yy * w + xx]
    };
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut sum = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    sum += sample(y + dy, x + dx);
                }
            }
            let mean = sum / n;
            let mut var = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let d = sample(y + dy, x + dx) - mean;
                    var += d * d;
                }
            }
            out.push((var / n).sqrt());
        }
    }
    out
}
