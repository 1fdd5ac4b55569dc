//! Image and video data model, pixel math, perturbation application and
//! raster/perturbation file I/O.

mod error;
mod field;
pub mod io;
mod mask;
mod perturbation;
mod pixel;
mod synthetic;
mod tensor;

pub use error::ImagingError;
pub use field::{Field, Shape};
pub use mask::{contrast_mask, ContrastMask, DEFAULT_MASK_WINDOW};
pub use perturbation::{
    apply_perturbation, apply_to_video, scale_to_amplitude, tile_perturbation, Perturbation,
    DEFAULT_CLIP_BOUND, DEFAULT_TILE,
};
pub use pixel::{clamp_unit, luminance, mse, psnr, psnr_with_cap, DEFAULT_PSNR_CAP};
pub use synthetic::{synthetic_image, synthetic_video};
pub use tensor::{ImageTensor, VideoFrames};

/// Rec. 601 luma weights (R, G, B).
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];
