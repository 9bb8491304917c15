//! Tensor files, CSV output and PPM color composites.
//!
//! A tensor file is the 8-byte magic `DLRRFT3\0`, a little-endian `u32`
//! version (1), the three dimensions as little-endian `u32`, and the entries
//! as little-endian `f64` in storage order (first index fastest).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Mat, Tensor3};

pub const MAGIC: &[u8; 8] = b"DLRRFT3\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 4;

pub fn encode_tensor(t: &Tensor3) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::InvalidArgument(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor3> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Malformed(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Malformed("bad magic".into()));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = word(8);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dims = [word(12) as usize, word(16) as usize, word(20) as usize];
    let expected = dims.iter().map(|&d| d as u64).product::<u64>() * 8;
    let found = (bytes.len() - HEADER_LEN) as u64;
    if expected != found {
        return Err(Error::SizeMismatch { expected, found });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor3::from_vec(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor3) -> Result<()> {
    fs::write(path, encode_tensor(t)?)?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    decode_tensor(&fs::read(path)?)
}

/// Matrices are stored as `rows x cols x 1` tensors.
pub fn mat_to_tensor(m: &Mat) -> Tensor3 {
    Tensor3::from_fn(m.rows(), m.cols(), 1, |i, j, _| m.get(i, j))
}

pub fn tensor_to_mat(t: &Tensor3) -> Result<Mat> {
    let [r, c, d] = t.dims();
    if d != 1 {
        return Err(Error::DimensionMismatch(format!("expected a matrix file, found third dimension {d}")));
    }
    Ok(Mat::from_fn(r, c, |i, j| t.get(i, j, 0)))
}

pub fn write_mat(path: impl AsRef<Path>, m: &Mat) -> Result<()> {
    write_tensor(path, &mat_to_tensor(m))
}

pub fn read_mat(path: impl AsRef<Path>) -> Result<Mat> {
    tensor_to_mat(&read_tensor(path)?)
}

/// Scientific notation with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with a header row; numbers use [`fmt_f64`], `None` becomes an empty field.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(header.join(",").as_bytes())?;
    out.write_all(b"\n")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.map(fmt_f64).unwrap_or_default()).collect();
        out.write_all(line.join(",").as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn normalize_channel(x: &Tensor3, band: usize) -> Vec<u8> {
    let data = x.slice(band);
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    data.iter()
        .map(|&v| {
            if hi > lo {
                (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8
            } else {
                128
            }
        })
        .collect()
}

/// Binary PPM (P6) of three bands, each min-max stretched to 0..=255 with
/// rounding to nearest; constant channels render as 128. Pixel `(i, j)` is
/// column `i`, row `j`.
pub fn encode_composite(x: &Tensor3, bands: [usize; 3]) -> Result<Vec<u8>> {
    let [w, h, s] = x.dims();
    if let Some(b) = bands.iter().find(|&&b| b >= s) {
        return Err(Error::InvalidArgument(format!("band {b} out of range for {s} bands")));
    }
    let channels: Vec<Vec<u8>> = bands.iter().map(|&b| normalize_channel(x, b)).collect();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * w * h);
    for j in 0..h {
        for i in 0..w {
            for c in &channels {
                out.push(c[i + w * j]);
            }
        }
    }
    Ok(out)
}

pub fn render_composite(x: &Tensor3, bands: [usize; 3], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_composite(x, bands)?)?;
    Ok(())
}
