//! Encoder/decoder pair driven through command templates.
//!
//! Templates are split into arguments on whitespace; single or double quotes
//! group words into one argument. No shell is involved, so placeholders are
//! substituted into individual arguments and never re-parsed.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{CodecError, CompressedResult};
use crate::imaging::io::{read_y4m, write_y4m, Chroma};
use crate::imaging::VideoFrames;

/// Environment variable naming the parent directory for scratch files.
pub const SCRATCH_ENV: &str = "UAPG_SCRATCH_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCodec {
    /// Must contain `{input}`, `{output}` and `{bitrate}`.
    pub encode: String,
    /// Must contain `{input}` and `{output}`; has to produce Y4M.
    pub decode: String,
    /// Bits per second, substituted for `{bitrate}`.
    pub target_bitrate: u64,
    /// File extension of the encoded file (selects the container for most tools).
    #[serde(default = "default_extension")]
    pub extension: String,
    /// Chroma layout of the Y4M handed to the encoder.
    #[serde(default)]
    pub chroma: Chroma,
}

fn default_extension() -> String {
    "mp4".to_string()
}

impl ExternalCodec {
    pub fn new(encode: impl Into<String>, decode: impl Into<String>, target_bitrate: u64) -> Self {
        Self {
            encode: encode.into(),
            decode: decode.into(),
            target_bitrate,
            extension: default_extension(),
            chroma: Chroma::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        for placeholder in ["{input}", "{output}", "{bitrate}"] {
            if !self.encode.contains(placeholder) {
                return Err(CodecError::Spec(format!(
                    "encode template is missing {placeholder}: {:?}",
                    self.encode
                )));
            }
        }
        for placeholder in ["{input}", "{output}"] {
            if !self.decode.contains(placeholder) {
                return Err(CodecError::Spec(format!(
                    "decode template is missing {placeholder}: {:?}",
                    self.decode
                )));
            }
        }
        if self.target_bitrate == 0 {
            return Err(CodecError::Spec("target bitrate must be positive".into()));
        }
        if self.extension.is_empty() || !self.extension.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(CodecError::Spec(format!(
                "encoded file extension must be alphanumeric, got {:?}",
                self.extension
            )));
        }
        split_template(&self.encode)?;
        split_template(&self.decode)?;
        Ok(())
    }
}

/// Split a template into arguments. Quotes group; they are not kept.
pub fn split_template(template: &str) -> Result<Vec<String>, CodecError> {
    let mut args = Vec::new();
    let mut current = String::new();
    let mut in_word = false;
    let mut quote: Option<char> = None;
    for ch in template.chars() {
        match quote {
            Some(q) if ch == q => quote = None,
            Some(_) => current.push(ch),
            None if ch == '\'' || ch == '"' => {
                quote = Some(ch);
                in_word = true;
            }
            None if ch.is_whitespace() => {
                if in_word {
                    args.push(std::mem::take(&mut current));
                    in_word = false;
                }
            }
            None => {
                current.push(ch);
                in_word = true;
            }
        }
    }
    if quote.is_some() {
        return Err(CodecError::Spec(format!("unterminated quote in template {template:?}")));
    }
    if in_word {
        args.push(current);
    }
    if args.is_empty() {
        return Err(CodecError::Spec("empty command template".into()));
    }
    Ok(args)
}

fn scratch_parent() -> PathBuf {
    std::env::var_os(SCRATCH_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
}

fn run(stage: &'static str, template: &str, input: &Path, output: &Path, bitrate: u64) -> Result<(), CodecError> {
    let args: Vec<String> = split_template(template)?
        .into_iter()
        .map(|a| {
            a.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
                .replace("{bitrate}", &bitrate.to_string())
        })
        .collect();
    let result = Command::new(&args[0]).args(&args[1..]).output().map_err(|e| CodecError::Command {
        stage,
        status: "not started".into(),
        diagnostics: format!("{}: {e}", args[0]),
    })?;
    if !result.status.success() {
        let mut diagnostics = String::from_utf8_lossy(&result.stderr).into_owned();
        if diagnostics.trim().is_empty() {
            diagnostics = String::from_utf8_lossy(&result.stdout).into_owned();
        }
        return Err(CodecError::Command {
            stage,
            status: result.status.to_string(),
            diagnostics: tail(&diagnostics, 4000),
        });
    }
    if !output.is_file() {
        return Err(CodecError::Output(format!(
            "{stage} command exited successfully but did not create {}",
            output.display()
        )));
    }
    Ok(())
}

fn tail(text: &str, max: usize) -> String {
    if text.len() <= max {
        return text.to_string();
    }
    let mut start = text.len() - max;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    format!("…{}", &text[start..])
}

/// Encode `video` with the external encoder and decode it back.
///
/// Each call works in its own scratch directory, removed afterwards.
pub fn external_encode_decode(video: &VideoFrames, codec: &ExternalCodec) -> Result<CompressedResult, CodecError> {
    codec.validate()?;
    let scratch = tempfile::Builder::new()
        .prefix("uapg-codec-")
        .tempdir_in(scratch_parent())?;
    let source = scratch.path().join("source.y4m");
    let encoded = scratch.path().join(format!("encoded.{}", codec.extension));
    let decoded = scratch.path().join("decoded.y4m");

    {
        let mut w = BufWriter::new(File::create(&source)?);
        write_y4m(&mut w, video, codec.chroma)?;
        std::io::Write::flush(&mut w)?;
    }
    run("encode", &codec.encode, &source, &encoded, codec.target_bitrate)?;
    let bytes = std::fs::metadata(&encoded)?.len();
    if bytes == 0 {
        return Err(CodecError::Output("encoder produced an empty file".into()));
    }
    run("decode", &codec.decode, &encoded, &decoded, codec.target_bitrate)?;
    let out = read_y4m(BufReader::new(File::open(&decoded)?))
        .map_err(|e| CodecError::Output(format!("decoded stream unreadable: {e}")))?;
    if out.len() != video.len() || out.shape() != video.shape() {
        return Err(CodecError::Output(format!(
            "decoded {} frames of {}, expected {} frames of {}",
            out.len(),
            out.shape(),
            video.len(),
            video.shape()
        )));
    }
    let out = VideoFrames::new(out.into_frames(), video.frame_rate())?;
    Ok(CompressedResult {
        video: out,
        measured_bitrate: bytes as f64 * 8.0 / video.duration(),
        codec_echo: format!("external target={}bps encode={:?}", codec.target_bitrate, codec.encode),
    })
}
