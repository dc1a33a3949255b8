//! Greyscale PGM images (P2 and P5).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Ascii,
    Binary,
}

/// Single-channel image with values in [0, 1], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() || rows == 0 || cols == 0 {
            return Err(Error::Image(format!(
                "{rows}×{cols} image cannot hold {} samples",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }
}

struct Header {
    magic: PgmFormat,
    cols: usize,
    rows: usize,
    maxval: u32,
    /// Offset of the first payload byte.
    offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let magic = match bytes.get(..2) {
        Some(b"P2") => PgmFormat::Ascii,
        Some(b"P5") => PgmFormat::Binary,
        _ => return Err(Error::Image("missing P2/P5 magic number".into())),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Image("truncated header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Image(format!("expected a number at byte {start}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| Error::Image(format!("header value `{text}` out of range")))?;
    }
    let [cols, rows, maxval] = fields;
    if cols == 0 || rows == 0 {
        return Err(Error::Image("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Image(format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from a binary payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        None if magic == PgmFormat::Ascii => {}
        _ => return Err(Error::Image("header not terminated by whitespace".into())),
    }
    Ok(Header {
        magic,
        cols: cols as usize,
        rows: rows as usize,
        maxval,
        offset: pos,
    })
}

/// Decodes a PGM byte buffer, scaling samples to [0, 1].
pub fn decode(bytes: &[u8]) -> Result<Image> {
    let h = parse_header(bytes)?;
    let n = h.rows * h.cols;
    let max = f64::from(h.maxval);
    let mut raw = Vec::with_capacity(n);
    match h.magic {
        PgmFormat::Ascii => {
            let text = std::str::from_utf8(&bytes[h.offset..])
                .map_err(|_| Error::Image("non-ASCII payload in P2 image".into()))?;
            for tok in text.split_ascii_whitespace() {
                let v: u32 = tok
                    .parse()
                    .map_err(|_| Error::Image(format!("bad sample `{tok}`")))?;
                raw.push(v);
            }
            if raw.len() < n {
                return Err(Error::Image(format!("truncated payload: {} of {n} samples", raw.len())));
            }
            if raw.len() > n {
                return Err(Error::Image(format!("{} samples for a {n}-pixel image", raw.len())));
            }
        }
        PgmFormat::Binary => {
            let width = if h.maxval > 255 { 2 } else { 1 };
            let payload = &bytes[h.offset..];
            if payload.len() < n * width {
                return Err(Error::Image(format!(
                    "truncated payload: {} of {} bytes",
                    payload.len(),
                    n * width
                )));
            }
            raw.extend(payload[..n * width].chunks_exact(width).map(|c| match c {
                [hi, lo] => u32::from(*hi) << 8 | u32::from(*lo),
                [v] => u32::from(*v),
                _ => unreachable!(),
            }));
        }
    }
    if let Some(v) = raw.iter().find(|v| **v > h.maxval) {
        return Err(Error::Image(format!("sample {v} exceeds maxval {}", h.maxval)));
    }
    Image::new(h.rows, h.cols, raw.into_iter().map(|v| f64::from(v) / max).collect())
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    decode(&fs::read(path)?).map_err(|e| match e {
        Error::Image(msg) => Error::Image(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Clamps to [0, 1] and rounds half to even.
pub fn quantize(v: f64, maxval: u32) -> u32 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * f64::from(maxval)).round_ties_even() as u32
}

pub fn encode(img: &Image, format: PgmFormat, maxval: u32) -> Result<Vec<u8>> {
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Image(format!("maxval {maxval} outside 1..=65535")));
    }
    let magic = match format {
        PgmFormat::Ascii => "P2",
        PgmFormat::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.cols, img.rows).into_bytes();
    let samples = img.data.iter().map(|v| quantize(*v, maxval));
    match format {
        PgmFormat::Ascii => {
            for row in img.data.chunks(img.cols) {
                let line: Vec<String> = row.iter().map(|v| quantize(*v, maxval).to_string()).collect();
                out.extend(line.join(" ").bytes());
                out.push(b'\n');
            }
        }
        PgmFormat::Binary if maxval > 255 => {
            for s in samples {
                out.extend((s as u16).to_be_bytes());
            }
        }
        PgmFormat::Binary => out.extend(samples.map(|s| s as u8)),
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, img: &Image, format: PgmFormat, maxval: u32) -> Result<()> {
    fs::write(path, encode(img, format, maxval)?)?;
    Ok(())
}
