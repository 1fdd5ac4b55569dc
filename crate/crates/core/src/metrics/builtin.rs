//! Closed-form toy metrics with analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GradientField, Metric, MetricDescriptor, MetricError, MetricKind};
use crate::imaging::{Field, Shape, LUMA_WEIGHTS};

fn descriptor(name: &str, lo: f64, hi: f64) -> MetricDescriptor {
    MetricDescriptor {
        name: name.to_string(),
        score_lo: lo,
        score_hi: hi,
        supports_gradient: true,
        kind: MetricKind::BuiltIn,
    }
}

/// `100 × mean pixel value`. Trivially gamed by brightening.
#[derive(Debug, Clone)]
pub struct MeanScorer {
    descriptor: MetricDescriptor,
}

impl MeanScorer {
    pub fn new() -> Self {
        MeanScorer {
            descriptor: descriptor("MeanScorer", 0.0, 100.0),
        }
    }
}

impl Default for MeanScorer {
    fn default() -> Self {
        Self::new()
    }
}

impl Metric for MeanScorer {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.descriptor
    }

    fn score(&self, x: &Field) -> Result<f64, MetricError> {
        Ok(100.0 * x.mean())
    }

    fn gradient(&self, x: &Field) -> Result<GradientField, MetricError> {
        Ok(Field::filled(x.shape(), 100.0 / x.data().len() as f64))
    }
}

/// Seed of the [`LinearScorer`] weight tile.
pub const LINEAR_SEED: u64 = 0x4c49_4e45_4152;
/// The weight tile side; weights repeat with this period.
pub const LINEAR_TILE: usize = 16;

/// `100 × ⟨w, x⟩ / |x|` with a fixed signed weight field `w`
/// (|w| ∈ [0.25, 1], tiled with period [`LINEAR_TILE`]).
#[derive(Debug, Clone)]
pub struct LinearScorer {
    descriptor: MetricDescriptor,
    tile: Vec<f64>,
}

impl LinearScorer {
    pub fn new() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(LINEAR_SEED);
        let tile = (0..LINEAR_TILE * LINEAR_TILE * 3)
            .map(|_| {
                let magnitude = rng.random_range(0.25..=1.0);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        LinearScorer {
            descriptor: descriptor("LinearScorer", -100.0, 100.0),
            tile,
        }
    }

    /// The weight field laid out over `shape`. Grayscale inputs use the
    /// first channel's weights.
    pub fn weights(&self, shape: Shape) -> Field {
        Field::from_fn(shape, |y, x, c| {
            self.tile[((y % LINEAR_TILE) * LINEAR_TILE + x % LINEAR_TILE) * 3 + c]
        })
    }
}

impl Default for LinearScorer {
    fn default() -> Self {
        Self::new()
    }
}

impl Metric for LinearScorer {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.descriptor
    }

    fn score(&self, x: &Field) -> Result<f64, MetricError> {
        let w = self.weights(x.shape());
        let dot: f64 = w.data().iter().zip(x.data()).map(|(a, b)| a * b).sum();
        Ok(100.0 * dot / x.data().len() as f64)
    }

    fn gradient(&self, x: &Field) -> Result<GradientField, MetricError> {
        let n = x.data().len() as f64;
        Ok(self.weights(x.shape()).map(|w| 100.0 * w / n))
    }
}

/// Laplacian energy penalty weight. The luma Laplacian of a unit-range
/// image lies in [−4, 4], so `k = 100/16` keeps the score inside [0, 100].
pub const NOISE_GUARD_GAIN: f64 = 6.25;

/// `100 − k·mean(L²)` over the luminance Laplacian `L` (4-neighbour, edge
/// replicated). Adding high-frequency energy lowers it, while a constant
/// shift leaves it unchanged, so it resists brightening and noise-like
/// perturbations. Being quadratic in the input, its central differences
/// are exact up to rounding.
#[derive(Debug, Clone)]
pub struct NoiseGuardScorer {
    descriptor: MetricDescriptor,
}

impl NoiseGuardScorer {
    pub fn new() -> Self {
        NoiseGuardScorer {
            descriptor: descriptor("NoiseGuardScorer", 0.0, 100.0),
        }
    }
}

impl Default for NoiseGuardScorer {
    fn default() -> Self {
        Self::new()
    }
}

fn luma(x: &Field) -> Vec<f64> {
    let s = x.shape();
    if s.channels == 1 {
        return x.data().to_vec();
    }
    x.data()
        .chunks(s.channels)
        .map(|px| px.iter().zip(LUMA_WEIGHTS).map(|(v, w)| v * w).sum())
        .collect()
}

fn neighbours(y: usize, x: usize, h: usize, w: usize) -> [usize; 4] {
    [
        y.saturating_sub(1) * w + x,
        (y + 1).min(h - 1) * w + x,
        y * w + x.saturating_sub(1),
        y * w + (x + 1).min(w - 1),
    ]
}

fn laplacian(lum: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let around: f64 = neighbours(y, x, h, w).iter().map(|&i| lum[i]).sum();
            out.push(around - 4.0 * lum[y * w + x]);
        }
    }
    out
}

impl Metric for NoiseGuardScorer {
    fn descriptor(&self) -> &MetricDescriptor {
        &self.descriptor
    }

    fn score(&self, x: &Field) -> Result<f64, MetricError> {
        let s = x.shape();
        let lap = laplacian(&luma(x), s.height, s.width);
        let energy: f64 = lap.iter().map(|l| l * l).sum();
        Ok(100.0 - NOISE_GUARD_GAIN * energy / s.pixels() as f64)
    }

    fn gradient(&self, x: &Field) -> Result<GradientField, MetricError> {
        let s = x.shape();
        let (h, w) = (s.height, s.width);
        let lap = laplacian(&luma(x), h, w);
        let scale = -2.0 * NOISE_GUARD_GAIN / s.pixels() as f64;
        // adjoint of the replicated Laplacian
        let mut d_lum = vec![0.0; h * w];
        for y in 0..h {
            for xx in 0..w {
                let g = scale * lap[y * w + xx];
                for i in neighbours(y, xx, h, w) {
                    d_lum[i] += g;
                }
                d_lum[y * w + xx] -= 4.0 * g;
            }
        }
        if s.channels == 1 {
            return Ok(Field::new(s, d_lum)?);
        }
        Ok(Field::from_fn(s, |y, xx, c| d_lum[y * w + xx] * LUMA_WEIGHTS[c]))
    }
}
