//! "ZOFF" and "ZTEN" binary containers.
//!
//! ZOFF: magic `ZOFF`, little-endian u32 fields (version = 1, channels,
//! height, width), then `channels * height * width` little-endian f32 in
//! channel-major raster order.
//!
//! ZTEN: magic `ZTEN`, little-endian u32 fields (version = 1, rank, one
//! u32 per dimension), then the row-major little-endian f32 payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::offset::OffsetField;
use crate::tensor::Tensor;

const MAX_ELEMENTS: u64 = 1 << 30;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, pos: 0, path }
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        if self.bytes.len() < 4 {
            return Err(Error::format(self.path, 0, "file too short for a magic number"));
        }
        let got = &self.bytes[..4];
        if got != expected {
            return Err(Error::format(
                self.path,
                0,
                format!(
                    "unknown magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        self.pos = 4;
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let at = self.pos;
        if self.bytes.len() < at + 4 {
            return Err(Error::format(
                self.path,
                self.bytes.len() as u64,
                format!("truncated while reading {what}"),
            ));
        }
        self.pos += 4;
        Ok(u32::from_le_bytes(self.bytes[at..at + 4].try_into().unwrap()))
    }

    fn version(&mut self) -> Result<()> {
        let at = self.pos;
        let version = self.u32("version")?;
        if version != 1 {
            return Err(Error::format(
                self.path,
                at as u64,
                format!("unsupported version {version}, expected 1"),
            ));
        }
        Ok(())
    }

    fn f32_payload(&mut self, count: u64) -> Result<Vec<f32>> {
        if count > MAX_ELEMENTS {
            return Err(Error::format(
                self.path,
                self.pos as u64,
                format!("element count {count} exceeds limit"),
            ));
        }
        let expected = count as usize * 4;
        let payload = &self.bytes[self.pos..];
        if payload.len() < expected {
            return Err(Error::format(
                self.path,
                self.bytes.len() as u64,
                format!("truncated payload: expected {expected} bytes, got {}", payload.len()),
            ));
        }
        if payload.len() > expected {
            return Err(Error::format(
                self.path,
                (self.pos + expected) as u64,
                format!("{} trailing bytes after payload", payload.len() - expected),
            ));
        }
        Ok(payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Writes an offset field as ZOFF; values are stored as f32.
pub fn save_offsets(path: &Path, field: &OffsetField) -> Result<()> {
    let mut out = Vec::with_capacity(20 + field.values().len() * 4);
    out.extend_from_slice(b"ZOFF");
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(field.channels() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    for &v in field.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a ZOFF file; all entries must be finite.
pub fn load_offsets(path: &Path) -> Result<OffsetField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(b"ZOFF")?;
    r.version()?;
    let channels = r.u32("channels")? as usize;
    let height = r.u32("height")? as usize;
    let width = r.u32("width")? as usize;
    let values = r.f32_payload(channels as u64 * height as u64 * width as u64)?;
    OffsetField::from_values(
        channels,
        height,
        width,
        values.iter().map(|&v| v as f64).collect(),
    )
    .map_err(|e| match e {
        Error::Shape(m) | Error::Domain(m) => Error::format(path, 20, m),
        other => other,
    })
}

/// Writes raw dims + f64 data as a ZTEN file (stored as f32).
pub fn write_zten(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    let expected: usize = dims.iter().product();
    if data.len() != expected {
        return Err(Error::shape(format!(
            "dims {dims:?} need {expected} values, got {}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(12 + dims.len() * 4 + data.len() * 4);
    out.extend_from_slice(b"ZTEN");
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a ZTEN file as raw dims + f64 data.
pub fn read_zten(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::new(&bytes, path);
    r.magic(b"ZTEN")?;
    r.version()?;
    let rank = r.u32("rank")? as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::format(path, 8, format!("implausible rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut count = 1u64;
    for i in 0..rank {
        let d = r.u32(&format!("dimension {i}"))? as usize;
        count = count.saturating_mul(d as u64);
        dims.push(d);
    }
    let values = r.f32_payload(count)?;
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::format(
            path,
            (12 + rank * 4) as u64,
            format!("non-finite value {bad}"),
        ));
    }
    Ok((dims, values.iter().map(|&v| v as f64).collect()))
}

/// Writes a tensor as ZTEN.
pub fn save_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    write_zten(path, tensor.shape(), tensor.data())
}

/// Reads a rank-3/4 ZTEN file as a tensor.
pub fn load_tensor(path: &Path) -> Result<Tensor> {
    let (dims, data) = read_zten(path)?;
    Tensor::new(dims, data).map_err(|e| match e {
        Error::Shape(m) | Error::Domain(m) => Error::format(path, 8, m),
        other => other,
    })
}
