//! `EDF1` feature files: the 4-byte magic `EDF1`, `u32` LE row count `T`,
//! `u32` LE column count `D`, then `T·D` little-endian `f64` values in
//! row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"EDF1";
const HEADER_LEN: usize = 12;

pub fn encode_feature(matrix: &Tensor<f64>) -> Result<Vec<u8>> {
    if matrix.rank() != 2 {
        return Err(Error::format(
            0,
            format!("feature must be a matrix, got shape {:?}", matrix.shape()),
        ));
    }
    encode_raw(matrix.shape()[0], matrix.shape()[1], matrix.data())
}

/// Encodes a row-major `rows × cols` buffer; both counts must be at least 1.
pub fn encode_raw(rows: usize, cols: usize, data: &[f64]) -> Result<Vec<u8>> {
    if rows == 0 || cols == 0 {
        return Err(Error::format(4, format!("empty shape {rows}x{cols}")));
    }
    let (t32, d32) = match (u32::try_from(rows), u32::try_from(cols)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => {
            return Err(Error::format(
                4,
                format!("shape {rows}x{cols} does not fit in u32"),
            ))
        }
    };
    if rows.checked_mul(cols) != Some(data.len()) {
        return Err(Error::dim("write_feature", &[rows, cols], &[data.len()]));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(
            "write_feature",
            "matrix contains non-finite values",
        ));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 8);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&t32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_feature(bytes: &[u8]) -> Result<Tensor<f64>> {
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len() as u64, "truncated before magic"));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format(0, format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if t == 0 || d == 0 {
        return Err(Error::format(4, format!("empty shape {t}x{d}")));
    }
    let payload = t
        .checked_mul(d)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::format(4, format!("shape {t}x{d} overflows")))?;
    let available = bytes.len() - HEADER_LEN;
    if available < payload {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: {available} of {payload} bytes"),
        ));
    }
    if available > payload {
        return Err(Error::format(
            (HEADER_LEN + payload) as u64,
            "trailing bytes after payload",
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(vec![t, d], data)
}

pub fn write_feature(path: &Path, matrix: &Tensor<f64>) -> Result<()> {
    let bytes = encode_feature(matrix)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_feature(path: &Path) -> Result<Tensor<f64>> {
    decode_feature(&fs::read(path)?)
}
