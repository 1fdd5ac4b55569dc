//! In-process block-DCT quantiser with an entropy-based rate estimate.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::dct::{self, N};
use super::{CodecError, CompressedResult};
use crate::imaging::{ImageTensor, VideoFrames};

/// Samples are centred on mid-gray before the transform, as in JPEG, so a
/// mid-gray block has an all-zero spectrum at every quantiser step.
const LEVEL_SHIFT: f64 = 0.5;

/// Quantiser step at `q = 1`.
pub const DELTA_MIN: f64 = 1.0 / 255.0;
/// Quantiser step as `q → 0`.
pub const DELTA_MAX: f64 = 0.25;

/// Quantiser step for quality `q`.
pub fn quant_step(quality: f64) -> f64 {
    (1.0 - quality) * DELTA_MAX + quality * DELTA_MIN
}

/// Encode and decode `video` with the mock codec at quality `quality`.
///
/// The reported bitrate is the empirical entropy of the quantised coefficient
/// stream times symbols per frame times frame rate. A completely uniform
/// symbol stream has zero entropy; the rate is then floored at one bit per
/// frame so that it stays strictly positive.
pub fn mock_encode_decode(video: &VideoFrames, quality: f64) -> Result<CompressedResult, CodecError> {
    if !(quality > 0.0 && quality <= 1.0) {
        return Err(CodecError::Spec(format!(
            "mock quality must be in (0, 1], got {quality}"
        )));
    }
    let delta = quant_step(quality);
    let coded: Vec<(ImageTensor, BTreeMap<i64, u64>)> = video
        .frames()
        .par_iter()
        .map(|frame| code_frame(frame, delta))
        .collect::<Result<_, _>>()?;

    let mut histogram: BTreeMap<i64, u64> = BTreeMap::new();
    let mut frames = Vec::with_capacity(coded.len());
    for (frame, counts) in coded {
        for (symbol, count) in counts {
            *histogram.entry(symbol).or_insert(0) += count;
        }
        frames.push(frame);
    }
    let total: u64 = histogram.values().sum();
    let entropy = histogram
        .values()
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum::<f64>();
    let symbols_per_frame = total as f64 / frames.len() as f64;
    let bits_per_frame = (entropy * symbols_per_frame).max(1.0);
    let measured_bitrate = bits_per_frame * video.frame_rate();

    Ok(CompressedResult {
        video: VideoFrames::new(frames, video.frame_rate())?,
        measured_bitrate,
        codec_echo: format!("mock-dct8 q={quality} step={delta}"),
    })
}

fn code_frame(frame: &ImageTensor, delta: f64) -> Result<(ImageTensor, BTreeMap<i64, u64>), CodecError> {
    let shape = frame.shape();
    let (h, w, ch) = (shape.height, shape.width, shape.channels);
    let bh = h.div_ceil(N);
    let bw = w.div_ceil(N);
    let src = frame.data();
    let mut out = vec![0.0; shape.len()];
    let mut counts = BTreeMap::new();
    for c in 0..ch {
        for by in 0..bh {
            for bx in 0..bw {
                let block: [f64; N * N] = std::array::from_fn(|i| {
                    let y = (by * N + i / N).min(h - 1);
                    let x = (bx * N + i % N).min(w - 1);
                    src[(y * w + x) * ch + c] - LEVEL_SHIFT
                });
                let mut coeffs = dct::forward(&block);
                for v in coeffs.iter_mut() {
                    let symbol = (*v / delta).round();
                    *counts.entry(symbol as i64).or_insert(0) += 1;
                    *v = symbol * delta;
                }
                let rec = dct::inverse(&coeffs);
                for (i, value) in rec.iter().enumerate() {
                    let y = by * N + i / N;
                    let x = bx * N + i % N;
                    if y < h && x < w {
                        out[(y * w + x) * ch + c] = (value + LEVEL_SHIFT).clamp(0.0, 1.0);
                    }
                }
            }
        }
    }
    Ok((ImageTensor::new(shape, out)?, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{psnr, Shape, DEFAULT_PSNR_CAP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smooth gradients plus mild noise: compressible but not trivial.
    fn seeded_video(seed: u64, frames: usize, size: usize) -> VideoFrames {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape::new(size, size, 3);
        let frames = (0..frames)
            .map(|t| {
                ImageTensor::from_fn(shape, |y, x, c| {
                    let base = 0.4
                        + 0.3 * ((x as f64 + 2.0 * t as f64) / 17.0 + c as f64).sin()
                            * ((y as f64) / 23.0).cos();
                    (base + 0.05 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)
                })
                .unwrap()
            })
            .collect();
        VideoFrames::new(frames, 25.0).unwrap()
    }

    fn video_psnr(a: &VideoFrames, b: &VideoFrames) -> f64 {
        let sum: f64 = a
            .frames()
            .iter()
            .zip(b.frames())
            .map(|(x, y)| psnr(x, y).unwrap())
            .sum();
        sum / a.len() as f64
    }

    #[test]
    fn step_endpoints() {
        assert_eq!(quant_step(1.0), DELTA_MIN);
        assert!((quant_step(0.5) - (0.125 + 0.5 / 255.0)).abs() < 1e-15);
    }

    #[test]
    fn near_lossless_at_full_quality() {
        let v = seeded_video(7, 4, 64);
        let out = mock_encode_decode(&v, 1.0).unwrap();
        assert!(video_psnr(&v, &out.video) >= 45.0);
    }

    #[test]
    fn monotone_in_quality() {
        let v = seeded_video(11, 8, 128);
        let mut prev: Option<(f64, f64)> = None;
        for q in [0.2, 0.4, 0.6, 0.8] {
            let out = mock_encode_decode(&v, q).unwrap();
            let p = video_psnr(&v, &out.video);
            if let Some((rate, quality)) = prev {
                assert!(out.measured_bitrate >= rate, "rate at q={q}");
                assert!(p >= quality, "psnr at q={q}");
            }
            prev = Some((out.measured_bitrate, p));
        }
    }

    #[test]
    fn mid_gray_survives_any_quality() {
        let shape = Shape::new(20, 27, 3);
        let frames = vec![ImageTensor::filled(shape, 0.5).unwrap(); 3];
        let v = VideoFrames::new(frames, 30.0).unwrap();
        for q in [0.05, 0.3, 0.7, 1.0] {
            let out = mock_encode_decode(&v, q).unwrap();
            assert_eq!(video_psnr(&v, &out.video), DEFAULT_PSNR_CAP, "q={q}");
            assert!(out.measured_bitrate > 0.0);
        }
    }

    #[test]
    fn deterministic_and_dimension_preserving() {
        let v = seeded_video(3, 3, 37);
        let a = mock_encode_decode(&v, 0.45).unwrap();
        let b = mock_encode_decode(&v, 0.45).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.video.len(), 3);
        assert_eq!(a.video.shape(), v.shape());
    }

    #[test]
    fn rate_matches_entropy_oracle() {
        // Independent computation: collect every symbol, count, sum -p log p.
        let v = seeded_video(5, 2, 16);
        let delta = quant_step(0.5);
        let mut symbols = Vec::new();
        for f in v.frames() {
            for c in 0..3 {
                for by in 0..2 {
                    for bx in 0..2 {
                        let mut block = [0.0; 64];
                        for (i, b) in block.iter_mut().enumerate() {
                            *b = f.at(by * 8 + i / 8, bx * 8 + i % 8, c) - 0.5;
                        }
                        symbols.extend(dct::forward(&block).iter().map(|v| (v / delta).round() as i64));
                    }
                }
            }
        }
        let mut counts = std::collections::HashMap::new();
        for s in &symbols {
            *counts.entry(*s).or_insert(0usize) += 1;
        }
        let n = symbols.len() as f64;
        let h: f64 = counts.values().map(|&c| -(c as f64 / n) * (c as f64 / n).log2()).sum();
        let expected = h * (n / 2.0) * 25.0;
        let out = mock_encode_decode(&v, 0.5).unwrap();
        assert!((out.measured_bitrate - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn rejects_bad_quality() {
        let v = seeded_video(1, 1, 8);
        assert!(mock_encode_decode(&v, 0.0).is_err());
        assert!(mock_encode_decode(&v, 1.5).is_err());
    }
}
