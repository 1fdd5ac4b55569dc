//! Binary perturbation file, little-endian:
//!
//! ```text
//! "UAPP" | version u32 = 1 | tile_height u32 | tile_width u32 | channels u32
//!        | clip_bound f32 | tile_height*tile_width*channels × f32
//! ```

use std::io::{Read, Write};

use crate::imaging::{Field, ImagingError, Perturbation, Shape};

pub const UAPP_MAGIC: &[u8; 4] = b"UAPP";
pub const UAPP_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

fn err(offset: usize, message: impl Into<String>) -> ImagingError {
    ImagingError::Format {
        kind: "uapp",
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn write_perturbation(mut w: impl Write, p: &Perturbation) -> Result<(), ImagingError> {
    let shape = p.shape();
    let mut buf = Vec::with_capacity(HEADER_LEN + shape.len() * 4);
    buf.extend_from_slice(UAPP_MAGIC);
    for v in [UAPP_VERSION, shape.height as u32, shape.width as u32, shape.channels as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(p.clip_bound() as f32).to_le_bytes());
    for &v in p.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_perturbation(mut r: impl Read) -> Result<Perturbation, ImagingError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(err(bytes.len(), format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len())));
    }
    if &bytes[..4] != UAPP_MAGIC {
        return Err(err(0, "bad magic, expected \"UAPP\""));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != UAPP_VERSION {
        return Err(err(4, format!("unsupported version {version}")));
    }
    let (th, tw, ch) = (word(8) as usize, word(12) as usize, word(16) as usize);
    if th == 0 || tw == 0 {
        return Err(err(8, "tile dimensions must be positive"));
    }
    if ch != 3 {
        return Err(err(16, format!("expected 3 channels, got {ch}")));
    }
    let clip = f32::from_le_bytes(bytes[20..24].try_into().unwrap()) as f64;
    if !(clip.is_finite() && clip > 0.0) {
        return Err(err(20, format!("invalid clip bound {clip}")));
    }
    let count = th
        .checked_mul(tw)
        .and_then(|n| n.checked_mul(ch))
        .ok_or_else(|| err(8, "tile dimensions overflow"))?;
    let expected = HEADER_LEN + count * 4;
    if bytes.len() < expected {
        return Err(err(bytes.len(), format!("truncated payload, expected {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(err(expected, "trailing data after payload"));
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        if !(v.abs() <= clip) {
            return Err(err(
                HEADER_LEN + i * 4,
                format!("value {v} outside clip bound {clip}"),
            ));
        }
        data.push(v);
    }
    Perturbation::new(Field::new(Shape::new(th, tw, ch), data)?, clip)
}
