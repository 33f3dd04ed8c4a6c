//! Grayscale PFM reader/writer (32-bit float samples).
//!
//! PFM stores scanlines bottom-to-top; a negative scale factor marks
//! little-endian sample bytes. The writer always emits scale -1.0.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize, path: &Path) -> Result<&'a str> {
    let start = *pos;
    while let Some(&b) = bytes.get(*pos) {
        *pos += 1;
        if b == b'\n' {
            let line = &bytes[start..*pos - 1];
            return std::str::from_utf8(line).map(str::trim).map_err(|_| {
                Error::format(path, start as u64, "header line is not valid UTF-8")
            });
        }
    }
    Err(Error::format(
        path,
        start as u64,
        "unexpected end of file in header",
    ))
}

/// Reads a grayscale PFM; returns (height, width, row-major top-down samples).
pub fn load_pfm_gray(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;

    let magic_pos = pos;
    let magic = read_line(&bytes, &mut pos, path)?;
    if magic == "PF" {
        return Err(Error::format(
            path,
            magic_pos as u64,
            "color PFM not supported; expected grayscale \"Pf\"",
        ));
    }
    if magic != "Pf" {
        return Err(Error::format(
            path,
            magic_pos as u64,
            format!("unknown magic {magic:?}"),
        ));
    }

    let dims_pos = pos;
    let dims = read_line(&bytes, &mut pos, path)?;
    let mut parts = dims.split_whitespace();
    let (width, height) = match (
        parts.next().and_then(|s| s.parse::<usize>().ok()),
        parts.next().and_then(|s| s.parse::<usize>().ok()),
        parts.next(),
    ) {
        (Some(w), Some(h), None) if w > 0 && h > 0 => (w, h),
        _ => {
            return Err(Error::format(
                path,
                dims_pos as u64,
                format!("invalid dimensions line {dims:?}"),
            ))
        }
    };

    let scale_pos = pos;
    let scale: f32 = read_line(&bytes, &mut pos, path)?
        .parse()
        .map_err(|_| Error::format(path, scale_pos as u64, "invalid scale factor"))?;
    let little_endian = scale < 0.0;

    let expected = height * width * 4;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::format(
            path,
            (pos + payload.len()) as u64,
            format!(
                "truncated payload: expected {expected} bytes, got {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            (pos + expected) as u64,
            format!("{} trailing bytes after sample data", payload.len() - expected),
        ));
    }

    // Flip from bottom-up storage to top-down rows.
    let mut samples = vec![0.0f32; height * width];
    for stored_row in 0..height {
        let row = height - 1 - stored_row;
        for col in 0..width {
            let at = (stored_row * width + col) * 4;
            let raw = [
                payload[at],
                payload[at + 1],
                payload[at + 2],
                payload[at + 3],
            ];
            samples[row * width + col] = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    Ok((height, width, samples))
}

/// Writes a grayscale PFM from row-major top-down samples.
pub fn save_pfm_gray(path: &Path, height: usize, width: usize, samples: &[f32]) -> Result<()> {
    if samples.len() != height * width {
        return Err(Error::shape(format!(
            "PFM {height}x{width} needs {} samples, got {}",
            height * width,
            samples.len()
        )));
    }
    let mut out = Vec::with_capacity(32 + samples.len() * 4);
    write!(out, "Pf\n{width} {height}\n-1.0\n").expect("vec write");
    for stored_row in 0..height {
        let row = height - 1 - stored_row;
        for col in 0..width {
            out.extend_from_slice(&samples[row * width + col].to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
