//! Binary PGM (P5, 16-bit) and PPM (P6, 8-bit) readers and writers.
//!
//! Header tokens are whitespace-separated with `#`-to-end-of-line comments;
//! pixel data follows the single whitespace byte after the maxval token.
//! 16-bit PGM samples are big-endian per the netpbm convention.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

struct TokenReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> TokenReader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, pos: 0, path }
    }

    fn skip_separators(&mut self) {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn token(&mut self) -> Result<(usize, &'a [u8])> {
        self.skip_separators();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(
                self.path,
                start as u64,
                "unexpected end of header",
            ));
        }
        Ok((start, &self.bytes[start..self.pos]))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let (start, tok) = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::format(
                    self.path,
                    start as u64,
                    format!("invalid {what} {:?}", String::from_utf8_lossy(tok)),
                )
            })
    }

    /// Consumes the single whitespace byte separating header from payload.
    fn start_payload(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(self.pos)
            }
            _ => Err(Error::format(
                self.path,
                self.pos as u64,
                "expected whitespace before pixel data",
            )),
        }
    }
}

fn parse_header<'a>(
    reader: &mut TokenReader<'a>,
    magic: &[u8],
    required_maxval: usize,
) -> Result<(usize, usize)> {
    let (start, tok) = reader.token()?;
    if tok != magic {
        return Err(Error::format(
            reader.path,
            start as u64,
            format!(
                "unknown magic {:?}, expected {:?}",
                String::from_utf8_lossy(tok),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let width = reader.number("width")?;
    let height = reader.number("height")?;
    let (maxval_pos, _) = (reader.pos, ());
    let maxval = reader.number("maxval")?;
    if maxval != required_maxval {
        return Err(Error::format(
            reader.path,
            maxval_pos as u64,
            format!("maxval must be {required_maxval}, got {maxval}"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(reader.path, start as u64, "empty image"));
    }
    Ok((height, width))
}

/// Reads a 16-bit binary PGM; returns (height, width, row-major samples).
pub fn load_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = TokenReader::new(&bytes, path);
    let (height, width) = parse_header(&mut reader, b"P5", 65535)?;
    let payload_start = reader.start_payload()?;
    let expected = height * width * 2;
    let payload = &bytes[payload_start..];
    if payload.len() < expected {
        return Err(Error::format(
            path,
            (payload_start + payload.len()) as u64,
            format!(
                "truncated payload: expected {expected} bytes, got {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            (payload_start + expected) as u64,
            format!("{} trailing bytes after pixel data", payload.len() - expected),
        ));
    }
    let samples = payload
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((height, width, samples))
}

/// Writes a 16-bit binary PGM (maxval 65535, big-endian samples).
pub fn save_pgm16(path: &Path, height: usize, width: usize, samples: &[u16]) -> Result<()> {
    if samples.len() != height * width {
        return Err(Error::shape(format!(
            "PGM {height}x{width} needs {} samples, got {}",
            height * width,
            samples.len()
        )));
    }
    let mut out = Vec::with_capacity(20 + samples.len() * 2);
    write!(out, "P5\n{width} {height}\n65535\n").expect("vec write");
    for &s in samples {
        out.extend_from_slice(&s.to_be_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a binary PPM (P6, maxval 255); returns (height, width, interleaved RGB).
pub fn load_ppm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = TokenReader::new(&bytes, path);
    let (height, width) = parse_header(&mut reader, b"P6", 255)?;
    let payload_start = reader.start_payload()?;
    let expected = height * width * 3;
    let payload = &bytes[payload_start..];
    if payload.len() < expected {
        return Err(Error::format(
            path,
            (payload_start + payload.len()) as u64,
            format!(
                "truncated payload: expected {expected} bytes, got {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            (payload_start + expected) as u64,
            format!("{} trailing bytes after pixel data", payload.len() - expected),
        ));
    }
    Ok((height, width, payload.to_vec()))
}

/// Writes a binary PPM (P6, maxval 255) from interleaved RGB bytes.
pub fn save_ppm(path: &Path, height: usize, width: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != height * width * 3 {
        return Err(Error::shape(format!(
            "PPM {height}x{width} needs {} bytes, got {}",
            height * width * 3,
            rgb.len()
        )));
    }
    let mut out = Vec::with_capacity(20 + rgb.len());
    write!(out, "P6\n{width} {height}\n255\n").expect("vec write");
    out.extend_from_slice(rgb);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn pgm16_roundtrip_with_comments() {
        let (_d, path) = tmp("a.pgm");
        save_pgm16(&path, 2, 3, &[0, 1, 2, 65535, 4, 5]).unwrap();
        let (h, w, data) = load_pgm16(&path).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(data, vec![0, 1, 2, 65535, 4, 5]);

        // Hand-built header with a comment line.
        let bytes = b"P5 # gray\n# size next\n2 1\n65535\n\x03\xe8\x07\xd0".to_vec();
        std::fs::write(&path, bytes).unwrap();
        let (h, w, data) = load_pgm16(&path).unwrap();
        assert_eq!((h, w), (1, 2));
        assert_eq!(data, vec![1000, 2000]);
    }

    #[test]
    fn pgm_rejects_wrong_maxval_and_truncation() {
        let (_d, path) = tmp("b.pgm");
        std::fs::write(&path, b"P5\n1 1\n255\n\x00").unwrap();
        match load_pgm16(&path) {
            Err(Error::Format { message, .. }) => assert!(message.contains("maxval")),
            other => panic!("expected maxval error, got {other:?}"),
        }

        std::fs::write(&path, b"P5\n2 2\n65535\n\x00\x01").unwrap();
        match load_pgm16(&path) {
            Err(Error::Format { offset, message, .. }) => {
                assert!(message.contains("truncated"));
                assert_eq!(offset, 14); // header is 12 bytes, 2 payload bytes present
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_format_error() {
        let (_d, path) = tmp("empty.pgm");
        std::fs::write(&path, b"").unwrap();
        assert!(matches!(load_pgm16(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn ppm_roundtrip() {
        let (_d, path) = tmp("c.ppm");
        let rgb = vec![255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30];
        save_ppm(&path, 2, 2, &rgb).unwrap();
        let (h, w, back) = load_ppm(&path).unwrap();
        assert_eq!((h, w), (2, 2));
        assert_eq!(back, rgb);
    }

    #[test]
    fn ppm_rejects_bad_magic() {
        let (_d, path) = tmp("d.ppm");
        std::fs::write(&path, b"P3\n1 1\n255\n1 2 3\n").unwrap();
        assert!(matches!(load_ppm(&path), Err(Error::Format { offset: 0, .. })));
    }
}
