//! YUV4MPEG2 reader/writer for 8-bit 4:2:0, 4:4:4 and mono streams.
//!
//! Colour conversion is full-range BT.601:
//!
//! ```text
//! Y  =  0.299    R + 0.587    G + 0.114    B
//! Cb = -0.168736 R - 0.331264 G + 0.5      B + 0.5
//! Cr =  0.5      R - 0.418688 G - 0.081312 B + 0.5
//!
//! R = Y + 1.402    (Cr - 0.5)
//! G = Y - 0.344136 (Cb - 0.5) - 0.714136 (Cr - 0.5)
//! B = Y + 1.772    (Cb - 0.5)
//! ```
//!
//! 4:2:0 chroma is box-averaged on write and replicated on read.

use std::io::{Read, Write};

use super::{u8_to_unit, unit_to_u8};
use crate::imaging::{ImageTensor, ImagingError, Shape, VideoFrames};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Chroma {
    #[default]
    #[serde(rename = "420")]
    C420,
    #[serde(rename = "444")]
    C444,
    #[serde(rename = "mono")]
    Mono,
}

impl Chroma {
    fn plane_dims(self, w: usize, h: usize) -> (usize, usize) {
        match self {
            Chroma::C420 => (w.div_ceil(2), h.div_ceil(2)),
            Chroma::C444 => (w, h),
            Chroma::Mono => (0, 0),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Chroma::C420 => "420jpeg",
            Chroma::C444 => "444",
            Chroma::Mono => "mono",
        }
    }
}

fn err(offset: usize, message: impl Into<String>) -> ImagingError {
    ImagingError::Format {
        kind: "y4m",
        offset: offset as u64,
        message: message.into(),
    }
}

struct Header {
    width: usize,
    height: usize,
    rate: f64,
    chroma: Chroma,
}

fn parse_header(line: &str, line_start: usize) -> Result<Header, ImagingError> {
    let mut tokens = line.split(' ');
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(err(line_start, "missing YUV4MPEG2 signature"));
    }
    let (mut width, mut height, mut rate, mut chroma) = (None, None, 25.0, Chroma::C420);
    let mut offset = line_start + "YUV4MPEG2".len() + 1;
    for tok in tokens {
        let (key, val) = tok.split_at(tok.len().min(1));
        match key {
            "W" => width = Some(val.parse::<usize>().map_err(|_| err(offset, "bad width"))?),
            "H" => height = Some(val.parse::<usize>().map_err(|_| err(offset, "bad height"))?),
            "F" => {
                let (n, d) = val.split_once(':').ok_or_else(|| err(offset, "bad frame rate"))?;
                let n: f64 = n.parse().map_err(|_| err(offset, "bad frame rate"))?;
                let d: f64 = d.parse().map_err(|_| err(offset, "bad frame rate"))?;
                if !(n > 0.0 && d > 0.0) {
                    return Err(err(offset, "frame rate must be positive"));
                }
                rate = n / d;
            }
            "C" => {
                chroma = match val {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
                    "444" => Chroma::C444,
                    "mono" => Chroma::Mono,
                    other => {
                        return Err(err(offset, format!("unsupported colourspace C{other}")))
                    }
                }
            }
            "" => {}
            _ => {} // I, A, X parameters do not affect decoding
        }
        offset += tok.len() + 1;
    }
    let width = width.ok_or_else(|| err(line_start, "missing W parameter"))?;
    let height = height.ok_or_else(|| err(line_start, "missing H parameter"))?;
    if width == 0 || height == 0 {
        return Err(err(line_start, "zero frame dimension"));
    }
    Ok(Header {
        width,
        height,
        rate,
        chroma,
    })
}

pub fn read_y4m(mut r: impl Read) -> Result<VideoFrames, ImagingError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let header_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| err(bytes.len(), "unterminated stream header"))?;
    let header_line = std::str::from_utf8(&bytes[..header_end])
        .map_err(|e| err(e.valid_up_to(), "non-UTF-8 stream header"))?;
    let header = parse_header(header_line, 0)?;
    let (w, h) = (header.width, header.height);
    let (cw, chh) = header.chroma.plane_dims(w, h);
    let frame_len = w * h + 2 * cw * chh;

    let mut pos = header_end + 1;
    let mut frames = Vec::new();
    while pos < bytes.len() {
        if !bytes[pos..].starts_with(b"FRAME") {
            return Err(err(pos, "expected FRAME marker"));
        }
        let nl = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err(bytes.len(), "unterminated FRAME header"))?;
        let start = pos + nl + 1;
        if bytes.len() < start + frame_len {
            return Err(err(
                bytes.len(),
                format!("truncated frame {} (need {frame_len} bytes from {start})", frames.len()),
            ));
        }
        let planes = &bytes[start..start + frame_len];
        frames.push(decode_frame(planes, w, h, header.chroma)?);
        pos = start + frame_len;
    }
    if frames.is_empty() {
        return Err(err(bytes.len(), "stream contains no frames"));
    }
    VideoFrames::new(frames, header.rate)
}

fn decode_frame(planes: &[u8], w: usize, h: usize, chroma: Chroma) -> Result<ImageTensor, ImagingError> {
    let luma = &planes[..w * h];
    if chroma == Chroma::Mono {
        return ImageTensor::new(
            Shape::new(h, w, 1),
            luma.iter().map(|&v| u8_to_unit(v)).collect(),
        );
    }
    let (cw, chh) = chroma.plane_dims(w, h);
    let cb = &planes[w * h..w * h + cw * chh];
    let cr = &planes[w * h + cw * chh..];
    let (sx, sy) = if chroma == Chroma::C420 { (2, 2) } else { (1, 1) };
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let yy = u8_to_unit(luma[y * w + x]);
            let ci = (y / sy) * cw + x / sx;
            let u = u8_to_unit(cb[ci]) - 0.5;
            let v = u8_to_unit(cr[ci]) - 0.5;
            let rgb = [
                yy + 1.402 * v,
                yy - 0.344136 * u - 0.714136 * v,
                yy + 1.772 * u,
            ];
            data.extend(rgb.iter().map(|c| c.clamp(0.0, 1.0)));
        }
    }
    ImageTensor::new(Shape::new(h, w, 3), data)
}

fn rate_fraction(rate: f64) -> (u64, u64) {
    for den in [1u64, 1001, 1000] {
        let num = (rate * den as f64).round();
        if ((num / den as f64) - rate).abs() < 1e-12 * rate {
            return (num as u64, den);
        }
    }
    let den = 1_000_000u64;
    let num = (rate * den as f64).round() as u64;
    let g = gcd(num, den);
    (num / g, den / g)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Writes `video`. Grayscale videos are always written as `Cmono`.
pub fn write_y4m(mut w: impl Write, video: &VideoFrames, chroma: Chroma) -> Result<(), ImagingError> {
    let shape = video.shape();
    let chroma = if shape.channels == 1 { Chroma::Mono } else { chroma };
    let (num, den) = rate_fraction(video.frame_rate());
    let mut out = format!(
        "YUV4MPEG2 W{} H{} F{num}:{den} Ip A1:1 C{}\n",
        shape.width,
        shape.height,
        chroma.tag()
    )
    .into_bytes();
    for frame in video.frames() {
        out.extend_from_slice(b"FRAME\n");
        encode_frame(&mut out, frame, chroma);
    }
    w.write_all(&out)?;
    Ok(())
}

fn encode_frame(out: &mut Vec<u8>, frame: &ImageTensor, chroma: Chroma) {
    let s = frame.shape();
    let (w, h) = (s.width, s.height);
    if chroma == Chroma::Mono {
        if s.channels == 1 {
            out.extend(frame.data().iter().map(|&v| unit_to_u8(v)));
        } else {
            for y in 0..h {
                for x in 0..w {
                    out.push(unit_to_u8(luma_of(frame, y, x)));
                }
            }
        }
        return;
    }
    let mut cb = vec![0.0; w * h];
    let mut cr = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (r, g, b) = (frame.at(y, x, 0), frame.at(y, x, 1), frame.at(y, x, 2));
            out.push(unit_to_u8(0.299 * r + 0.587 * g + 0.114 * b));
            cb[y * w + x] = -0.168736 * r - 0.331264 * g + 0.5 * b + 0.5;
            cr[y * w + x] = 0.5 * r - 0.418688 * g - 0.081312 * b + 0.5;
        }
    }
    match chroma {
        Chroma::C444 => {
            out.extend(cb.iter().map(|&v| unit_to_u8(v)));
            out.extend(cr.iter().map(|&v| unit_to_u8(v)));
        }
        Chroma::C420 => {
            for plane in [&cb, &cr] {
                for cy in 0..h.div_ceil(2) {
                    for cx in 0..w.div_ceil(2) {
                        let mut sum = 0.0;
                        let mut n = 0.0;
                        for y in 2 * cy..(2 * cy + 2).min(h) {
                            for x in 2 * cx..(2 * cx + 2).min(w) {
                                sum += plane[y * w + x];
                                n += 1.0;
                            }
                        }
                        out.push(unit_to_u8(sum / n));
                    }
                }
            }
        }
        Chroma::Mono => unreachable!(),
    }
}

fn luma_of(frame: &ImageTensor, y: usize, x: usize) -> f64 {
    0.299 * frame.at(y, x, 0) + 0.587 * frame.at(y, x, 1) + 0.114 * frame.at(y, x, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn video(frames: usize, shape: Shape, rate: f64, seed: u64) -> VideoFrames {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = (0..frames)
            .map(|_| ImageTensor::from_fn(shape, |_, _, _| rng.random::<f64>()).unwrap())
            .collect();
        VideoFrames::new(frames, rate).unwrap()
    }

    #[test]
    fn three_frames_round_trip_count_and_rate() {
        for chroma in [Chroma::C420, Chroma::C444] {
            for rate in [25.0, 30000.0 / 1001.0] {
                let v = video(3, Shape::new(9, 10, 3), rate, 1);
                let mut bytes = vec![];
                write_y4m(&mut bytes, &v, chroma).unwrap();
                let back = read_y4m(bytes.as_slice()).unwrap();
                assert_eq!(back.len(), 3);
                assert!((back.frame_rate() - rate).abs() < 1e-12);
                assert_eq!(back.shape(), v.shape());
            }
        }
    }

    #[test]
    fn stored_values_round_trip_losslessly() {
        // once quantised to the stored 8-bit YCbCr, a second pass is exact
        let v = video(2, Shape::new(8, 8, 3), 24.0, 2);
        for chroma in [Chroma::C420, Chroma::C444] {
            let mut first = vec![];
            write_y4m(&mut first, &v, chroma).unwrap();
            let decoded = read_y4m(first.as_slice()).unwrap();
            let mut second = vec![];
            write_y4m(&mut second, &decoded, Chroma::C444).unwrap();
            let again = read_y4m(second.as_slice()).unwrap();
            for (a, b) in decoded.frames().iter().zip(again.frames()) {
                let err = crate::imaging::mse(a, b).unwrap();
                assert!(err < 1e-4, "second-generation error {err}");
            }
        }
        let gray = video(2, Shape::new(5, 6, 1), 24.0, 3);
        let mut bytes = vec![];
        write_y4m(&mut bytes, &gray, Chroma::C444).unwrap();
        let back = read_y4m(bytes.as_slice()).unwrap();
        let mut again = vec![];
        write_y4m(&mut again, &back, Chroma::C444).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn conversion_error_is_small() {
        let v = video(1, Shape::new(16, 16, 3), 25.0, 4);
        let mut bytes = vec![];
        write_y4m(&mut bytes, &v, Chroma::C444).unwrap();
        let back = read_y4m(bytes.as_slice()).unwrap();
        let p = crate::imaging::psnr(&v.frames()[0], &back.frames()[0]).unwrap();
        assert!(p > 40.0, "444 round trip psnr {p}");
    }

    #[test]
    fn truncated_stream_reports_offset() {
        let v = video(2, Shape::new(4, 4, 3), 25.0, 5);
        let mut bytes = vec![];
        write_y4m(&mut bytes, &v, Chroma::C444).unwrap();
        let cut = bytes.len() - 5;
        match read_y4m(&bytes[..cut]) {
            Err(ImagingError::Format { offset, .. }) => assert_eq!(offset as usize, cut),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_y4m(&b"YUV4MPEG2 W4 H4 C411\n"[..]),
            Err(ImagingError::Format { .. })
        ));
        assert!(matches!(
            read_y4m(&b"RIFF"[..]),
            Err(ImagingError::Format { .. })
        ));
    }
}
