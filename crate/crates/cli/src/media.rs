//! Input sources: files on disk or seeded synthetic content.
//!
//! Synthetic sources are written `synthetic:key=value,...`:
//! - images for training: `synthetic:seed=S,count=N,size=T` (T×T)
//! - one image: `synthetic:seed=S,size=HxW`
//! - one video: `synthetic:seed=S,frames=F,size=HxW[,fps=R]`

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use uapg::imaging::io::{read_png, read_y4m, write_png, write_y4m, Chroma};
use uapg::imaging::{synthetic_image, synthetic_video, ImageTensor, VideoFrames};

use crate::error::CliError;

const SYNTHETIC: &str = "synthetic:";
pub const DEFAULT_FRAME_RATE: f64 = 25.0;

struct Params<'a> {
    source: &'a str,
    values: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    fn parse(source: &'a str, allowed: &[&str]) -> Result<Self, CliError> {
        let body = &source[SYNTHETIC.len()..];
        let mut values = BTreeMap::new();
        for item in body.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("{source}: expected key=value, got {item:?}")))?;
            let k = k.trim();
            if !allowed.contains(&k) {
                return Err(CliError::config(format!(
                    "{source}: unknown key {k:?} (allowed: {})",
                    allowed.join(", ")
                )));
            }
            values.insert(k, v.trim());
        }
        Ok(Self { source, values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T, CliError> {
        match self.values.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| CliError::config(format!("{}: invalid {key} {v:?}", self.source))),
            None => default.ok_or_else(|| CliError::config(format!("{}: missing {key}", self.source))),
        }
    }

    /// `HxW`, or a single `T` for square.
    fn size(&self) -> Result<(usize, usize), CliError> {
        let raw: String = self.get("size", None)?;
        let bad = || CliError::config(format!("{}: invalid size {raw:?}, expected HxW", self.source));
        let (h, w) = match raw.split_once(['x', 'X']) {
            Some((h, w)) => (h.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?),
            None => {
                let t = raw.parse().map_err(|_| bad())?;
                (t, t)
            }
        };
        if h == 0 || w == 0 {
            return Err(bad());
        }
        Ok((h, w))
    }
}

pub fn is_synthetic(source: &str) -> bool {
    source.starts_with(SYNTHETIC)
}

/// Seeded training images; `default_seed` applies when no seed is given.
pub fn synthetic_images(source: &str, default_seed: u64) -> Result<Vec<ImageTensor>, CliError> {
    let p = Params::parse(source, &["seed", "count", "size"])?;
    let seed: u64 = p.get("seed", Some(default_seed))?;
    let count: usize = p.get("count", None)?;
    let (h, w) = p.size()?;
    if count == 0 {
        return Err(CliError::config(format!("{source}: count must be positive")));
    }
    (0..count)
        .map(|i| synthetic_image(seed.wrapping_mul(1_000_003).wrapping_add(i as u64), h, w).map_err(Into::into))
        .collect()
}

/// A PNG path or a synthetic image spec.
pub fn load_image(source: &str) -> Result<ImageTensor, CliError> {
    if is_synthetic(source) {
        let p = Params::parse(source, &["seed", "size"])?;
        let (h, w) = p.size()?;
        return Ok(synthetic_image(p.get("seed", Some(0))?, h, w)?);
    }
    let path = Path::new(source);
    if !path.is_file() {
        return Err(CliError::config(format!("input image {} does not exist", path.display())));
    }
    read_png(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// A Y4M path or a synthetic video spec.
pub fn load_video(source: &str) -> Result<VideoFrames, CliError> {
    if is_synthetic(source) {
        let p = Params::parse(source, &["seed", "frames", "size", "fps"])?;
        let (h, w) = p.size()?;
        return Ok(synthetic_video(
            p.get("seed", Some(0))?,
            p.get("frames", None)?,
            h,
            w,
            p.get("fps", Some(DEFAULT_FRAME_RATE))?,
        )?);
    }
    let path = Path::new(source);
    let file = File::open(path).map_err(|e| CliError::config(format!("cannot open video {}: {e}", path.display())))?;
    read_y4m(BufReader::new(file)).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Short identifier used in reports: the file stem, or `synthetic-s<seed>`.
pub fn video_id(source: &str) -> String {
    if is_synthetic(source) {
        let seed = Params::parse(source, &["seed", "frames", "size", "fps"])
            .ok()
            .and_then(|p| p.values.get("seed").map(|s| s.to_string()))
            .unwrap_or_else(|| "0".into());
        return format!("synthetic-s{seed}");
    }
    Path::new(source)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source.to_string())
}

/// Whether a source or output path names a video.
pub fn is_video(source: &str) -> bool {
    if is_synthetic(source) {
        return source.contains("frames=");
    }
    Path::new(source)
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("y4m"))
}

pub fn save_image(path: &Path, img: &ImageTensor) -> Result<(), CliError> {
    create_parent(path)?;
    write_png(path, img).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

/// Videos are written as 4:4:4 Y4M to avoid chroma subsampling loss.
pub fn save_video(path: &Path, video: &VideoFrames) -> Result<(), CliError> {
    create_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    write_y4m(&mut w, video, Chroma::C444)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    w.flush()?;
    Ok(())
}

pub fn create_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", parent.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_specs() {
        let imgs = synthetic_images("synthetic:seed=1,count=3,size=8", 0).unwrap();
        assert_eq!(imgs.len(), 3);
        assert_eq!(imgs[0].shape().height, 8);
        let v = load_video("synthetic:seed=2,frames=4,size=6x10,fps=30").unwrap();
        assert_eq!((v.len(), v.shape().height, v.shape().width, v.frame_rate()), (4, 6, 10, 30.0));
        assert_eq!(video_id("synthetic:seed=2,frames=4,size=6x10"), "synthetic-s2");
        assert_eq!(video_id("clips/foreman.y4m"), "foreman");
        assert!(is_video("synthetic:seed=2,frames=4,size=6x10"));
        assert!(!is_video("synthetic:seed=2,size=6x10"));
    }

    #[test]
    fn malformed_specs_are_config_errors() {
        for bad in [
            "synthetic:seed=1,count=3",
            "synthetic:seed=x,count=3,size=8",
            "synthetic:seed=1,count=0,size=8",
            "synthetic:seed=1,count=3,size=8,colour=red",
        ] {
            assert!(matches!(synthetic_images(bad, 0), Err(CliError::Config(_))), "{bad}");
        }
        assert!(matches!(load_image("/no/such/file.png"), Err(CliError::Config(m)) if m.contains("/no/such/file.png")));
    }
}
