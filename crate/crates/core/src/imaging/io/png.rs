use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{u8_to_unit, unit_to_u8};
use crate::imaging::{ImageTensor, ImagingError, Shape};

fn format_err(message: impl std::fmt::Display) -> ImagingError {
    // the png decoder does not expose a byte position
    ImagingError::Format {
        kind: "png",
        offset: 0,
        message: message.to_string(),
    }
}

/// Reads an 8-bit PNG as RGB or grayscale. Palettes are expanded, alpha is
/// dropped, 16-bit samples are reduced to 8 bits.
pub fn read_png(path: &Path) -> Result<ImageTensor, ImagingError> {
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    decoder.set_transformations(Transformations::EXPAND | Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(format_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err("image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(format_err)?;
    if info.bit_depth != BitDepth::Eight {
        return Err(format_err(format!("unsupported bit depth {:?}", info.bit_depth)));
    }
    let (stride_channels, keep) = match info.color_type {
        ColorType::Grayscale => (1, 1),
        ColorType::GrayscaleAlpha => (2, 1),
        ColorType::Rgb => (3, 3),
        ColorType::Rgba => (4, 3),
        other => return Err(format_err(format!("unsupported color type {other:?}"))),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    let mut data = Vec::with_capacity(w * h * keep);
    for row in buf[..info.buffer_size()].chunks(info.line_size).take(h) {
        for px in row[..w * stride_channels].chunks(stride_channels) {
            data.extend(px[..keep].iter().map(|&v| u8_to_unit(v)));
        }
    }
    ImageTensor::new(Shape::new(h, w, keep), data)
}

pub fn write_png(path: &Path, img: &ImageTensor) -> Result<(), ImagingError> {
    let shape = img.shape();
    let mut encoder = png::Encoder::new(
        BufWriter::new(File::create(path)?),
        shape.width as u32,
        shape.height as u32,
    );
    encoder.set_color(if shape.channels == 1 {
        ColorType::Grayscale
    } else {
        ColorType::Rgb
    });
    encoder.set_depth(BitDepth::Eight);
    let bytes: Vec<u8> = img.data().iter().map(|&v| unit_to_u8(v)).collect();
    let mut writer = encoder.write_header().map_err(format_err)?;
    writer.write_image_data(&bytes).map_err(format_err)?;
    writer.finish().map_err(format_err)?;
    Ok(())
}
