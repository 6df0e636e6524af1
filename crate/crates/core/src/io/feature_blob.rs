//! Plain `f32` sample dumps with a small header, used for precomputed
//! penultimate features of convolutional models:
//!
//! ```text
//! b"MGDF" | u32 version | u64 count | u64 dim | count*dim f32
//! ```
//!
//! All integers and floats little-endian. Labels travel separately as an IDX
//! label file.

use std::path::Path;

use super::atomic::{read_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const FEATURE_MAGIC: [u8; 4] = *b"MGDF";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlob {
    pub count: usize,
    pub dim: usize,
    /// Row-major `count x dim`, promoted to `f64`.
    pub values: Vec<f64>,
}

impl FeatureBlob {
    pub fn new(count: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if count * dim != values.len() {
            return Err(Error::shape(format!(
                "{count}x{dim} feature blob given {} values",
                values.len()
            )));
        }
        Ok(FeatureBlob { count, dim, values })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    /// One network input per row.
    pub fn tensors(&self) -> Result<Vec<Tensor>> {
        (0..self.count).map(|r| Tensor::vector(self.row(r).to_vec())).collect()
    }
}

pub fn is_feature_blob(bytes: &[u8]) -> bool {
    bytes.starts_with(&FEATURE_MAGIC)
}

pub fn encode_feature_blob(blob: &FeatureBlob) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + blob.values.len() * 4);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(blob.count as u64).to_le_bytes());
    out.extend_from_slice(&(blob.dim as u64).to_le_bytes());
    out.extend(blob.values.iter().flat_map(|&v| (v as f32).to_le_bytes()));
    out
}

pub fn parse_feature_blob(bytes: &[u8], path: &Path) -> Result<FeatureBlob> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse(
            path,
            format!("truncated header: need {HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if !is_feature_blob(bytes) {
        return Err(Error::parse(path, "bad magic at offset 0 (expected \"MGDF\")"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FEATURE_VERSION {
        return Err(Error::parse(path, format!("unsupported version {version} at offset 4")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let dim = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = count
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::parse(path, format!("dimensions {count}x{dim} overflow")))?;
    if payload.len() != expected {
        return Err(Error::parse(
            path,
            format!(
                "payload at offset {HEADER_LEN}: expected {expected} bytes for {count}x{dim}, found {}",
                payload.len()
            ),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    FeatureBlob::new(count, dim, values)
}

pub fn read_feature_blob(path: &Path) -> Result<FeatureBlob> {
    parse_feature_blob(&read_bytes(path)?, path)
}

pub fn write_feature_blob(path: &Path, blob: &FeatureBlob) -> Result<()> {
    write_atomic(path, &encode_feature_blob(blob))
}
