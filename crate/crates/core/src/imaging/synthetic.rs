//! Seeded synthetic content for desk-scale runs and tests.
//!
//! Images are a few soft colour blobs over a smooth background plus mild
//! grain. Like typical camera footage, the darkest shadows are crushed to
//! black; highlights stay at or below 0.85 so that moderate positive
//! perturbations do not saturate at white.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ImageTensor, ImagingError, Shape, VideoFrames};

/// Tone-curve black point; content below 0 after grain is clipped.
const LOW: f64 = -0.1;
const HIGH: f64 = 0.85;

struct Blob {
    cy: f64,
    cx: f64,
    vy: f64,
    vx: f64,
    radius: f64,
    colour: [f64; 3],
}

struct Scene {
    background: [[f64; 3]; 2],
    angle: f64,
    blobs: Vec<Blob>,
    grain_seed: u64,
}

impl Scene {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let colour = |rng: &mut ChaCha8Rng| -> [f64; 3] { std::array::from_fn(|_| rng.random::<f64>()) };
        let background = [colour(rng), colour(rng)];
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let blobs = (0..rng.random_range(3..=6))
            .map(|_| Blob {
                cy: rng.random(),
                cx: rng.random(),
                vy: (rng.random::<f64>() - 0.5) * 0.04,
                vx: (rng.random::<f64>() - 0.5) * 0.04,
                radius: 0.08 + 0.2 * rng.random::<f64>(),
                colour: colour(rng),
            })
            .collect();
        Self { background, angle, blobs, grain_seed: rng.random() }
    }

    fn render(&self, shape: Shape, t: usize) -> Result<ImageTensor, ImagingError> {
        let mut grain = ChaCha8Rng::seed_from_u64(self.grain_seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (h, w) = (shape.height as f64, shape.width as f64);
        let (sin, cos) = self.angle.sin_cos();
        let mut pixel = [0.0; 3];
        ImageTensor::from_fn(shape, |y, x, c| {
            if c == 0 {
                let v = y as f64 / h;
                let u = x as f64 / w;
                let ramp = 0.5 + 0.5 * ((u - 0.5) * cos + (v - 0.5) * sin);
                for (k, out) in pixel.iter_mut().enumerate() {
                    *out = self.background[0][k] * (1.0 - ramp) + self.background[1][k] * ramp;
                }
                for blob in &self.blobs {
                    let dy = v - (blob.cy + blob.vy * t as f64);
                    let dx = u - (blob.cx + blob.vx * t as f64);
                    let weight = (-(dy * dy + dx * dx) / (2.0 * blob.radius * blob.radius)).exp();
                    for (k, out) in pixel.iter_mut().enumerate() {
                        *out += weight * (blob.colour[k] - *out);
                    }
                }
                let g = 0.04 * (grain.random::<f64>() - 0.5);
                for out in pixel.iter_mut() {
                    *out = (LOW + (HIGH - LOW) * (*out + g).clamp(0.0, 1.0)).clamp(0.0, HIGH);
                }
            }
            pixel[c]
        })
    }
}

/// A single seeded RGB image.
pub fn synthetic_image(seed: u64, height: usize, width: usize) -> Result<ImageTensor, ImagingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Scene::new(&mut rng).render(Shape::new(height, width, 3), 0)
}

/// A seeded RGB clip with slowly drifting content.
pub fn synthetic_video(
    seed: u64,
    frames: usize,
    height: usize,
    width: usize,
    frame_rate: f64,
) -> Result<VideoFrames, ImagingError> {
    if frames == 0 {
        return Err(ImagingError::Parameter("synthetic video needs at least one frame".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = Scene::new(&mut rng);
    let shape = Shape::new(height, width, 3);
    let frames = (0..frames).map(|t| scene.render(shape, t)).collect::<Result<_, _>>()?;
    VideoFrames::new(frames, frame_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = synthetic_video(4, 3, 20, 30, 25.0).unwrap();
        let b = synthetic_video(4, 3, 20, 30, 25.0).unwrap();
        assert_eq!(a, b);
        for f in a.frames() {
            assert!(f.data().iter().all(|v| (0.0..=HIGH).contains(v)));
        }
        assert_ne!(a.frames()[0], a.frames()[1]);
        assert_ne!(synthetic_image(1, 8, 8).unwrap(), synthetic_image(2, 8, 8).unwrap());
    }
}
