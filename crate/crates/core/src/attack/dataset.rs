use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use super::AttackError;
use crate::imaging::io::read_png;
use crate::imaging::{Field, ImageTensor, Shape};

/// Random-access training images.
pub trait ImageSource: Sync {
    fn len(&self) -> usize;

    fn load(&self, index: usize) -> Result<ImageTensor, AttackError>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ImageSource for [ImageTensor] {
    fn len(&self) -> usize {
        <[ImageTensor]>::len(self)
    }

    fn load(&self, index: usize) -> Result<ImageTensor, AttackError> {
        Ok(self[index].clone())
    }
}

impl ImageSource for Vec<ImageTensor> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn load(&self, index: usize) -> Result<ImageTensor, AttackError> {
        Ok(self[index].clone())
    }
}

/// PNG files in a directory (sorted by file name), fitted to a square tile
/// on load: resized so the short side equals the tile, then centre-cropped.
/// Grayscale files are expanded to RGB.
#[derive(Debug)]
pub struct DirectorySource {
    paths: Vec<PathBuf>,
    tile: usize,
    adjusted: Vec<AtomicBool>,
}

impl DirectorySource {
    pub fn open(dir: &Path, tile: usize) -> Result<Self, AttackError> {
        if tile == 0 {
            return Err(AttackError::Parameter("tile size must be positive".into()));
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png"))
            })
            .collect();
        paths.sort();
        let adjusted = paths.iter().map(|_| AtomicBool::new(false)).collect();
        Ok(DirectorySource {
            paths,
            tile,
            adjusted,
        })
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    /// How many of the images loaded so far had to be resized or cropped.
    pub fn adjusted_count(&self) -> usize {
        self.adjusted
            .iter()
            .filter(|f| f.load(Ordering::Relaxed))
            .count()
    }
}

impl ImageSource for DirectorySource {
    fn len(&self) -> usize {
        self.paths.len()
    }

    fn load(&self, index: usize) -> Result<ImageTensor, AttackError> {
        let img = read_png(&self.paths[index])?;
        let img = if img.shape().channels == 1 {
            ImageTensor::from_fn(Shape::new(img.shape().height, img.shape().width, 3), |y, x, _| {
                img.at(y, x, 0)
            })?
        } else {
            img
        };
        let (fitted, changed) = fit_to_tile(&img, self.tile)?;
        if changed {
            self.adjusted[index].store(true, Ordering::Relaxed);
        }
        Ok(fitted)
    }
}

/// Resizes (bilinear, pixel-centre aligned) so the short side equals `tile`,
/// then centre-crops to `tile × tile`.
pub(crate) fn fit_to_tile(img: &ImageTensor, tile: usize) -> Result<(ImageTensor, bool), AttackError> {
    let s = img.shape();
    if s.height == tile && s.width == tile {
        return Ok((img.clone(), false));
    }
    let scale = tile as f64 / s.height.min(s.width) as f64;
    let rh = ((s.height as f64 * scale).round() as usize).max(tile);
    let rw = ((s.width as f64 * scale).round() as usize).max(tile);
    let resized = if (rh, rw) == (s.height, s.width) {
        img.as_field().clone()
    } else {
        resize_bilinear(img, rh, rw)
    };
    let (oy, ox) = ((rh - tile) / 2, (rw - tile) / 2);
    let cropped = Field::from_fn(Shape::new(tile, tile, s.channels), |y, x, c| {
        resized.at(y + oy, x + ox, c)
    });
    Ok((ImageTensor::clamped(cropped)?, true))
}

fn resize_bilinear(img: &Field, h: usize, w: usize) -> Field {
    let s = img.shape();
    let sy = s.height as f64 / h as f64;
    let sx = s.width as f64 / w as f64;
    let coord = |o: usize, scale: f64, n: usize| {
        let p = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        (i0, (i0 + 1).min(n - 1), p - i0 as f64)
    };
    Field::from_fn(Shape::new(h, w, s.channels), |y, x, c| {
        let (y0, y1, fy) = coord(y, sy, s.height);
        let (x0, x1, fx) = coord(x, sx, s.width);
        let top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
        let bottom = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
        top * (1.0 - fy) + bottom * fy
    })
}
