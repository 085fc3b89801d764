//! Binary tensor container.
//!
//! Layout, little-endian throughout:
//!
//! | offset | size     | field                          |
//! |--------|----------|--------------------------------|
//! | 0      | 4        | magic `NEBI`                   |
//! | 4      | 1        | version (`1`)                  |
//! | 5      | 1        | dtype (`0` = f32)              |
//! | 6      | 1        | ndim                           |
//! | 7      | 8 * ndim | dims, `u64` each               |
//! | ...    | 4 * prod | payload, row-major `f32`       |

use std::fs;
use std::path::Path;

use crate::error::{NebiError, Result};

pub const MAGIC: [u8; 4] = *b"NEBI";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 0;

/// Dense row-major `f32` array with explicit dims.
#[derive(Debug, Clone, PartialEq)]
pub struct NdArray {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl NdArray {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > u8::MAX as usize || dims.contains(&0) {
            return Err(NebiError::InvalidDims(dims));
        }
        let n = element_count(&dims)?;
        if n != data.len() as u64 {
            return Err(NebiError::ShapeMismatch(format!(
                "dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        Ok(NdArray { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0` and comparing NaN payloads.
    pub fn bit_eq(&self, other: &NdArray) -> bool {
        self.dims == other.dims
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

fn element_count(dims: &[usize]) -> Result<u64> {
    dims.iter().try_fold(1u64, |acc, &d| {
        acc.checked_mul(d as u64).ok_or(NebiError::DimsOverflow)
    })
}

pub fn encode_tensor(array: &NdArray) -> Result<Vec<u8>> {
    let dims = array.dims();
    if dims.is_empty() || dims.contains(&0) {
        return Err(NebiError::InvalidDims(dims.to_vec()));
    }
    let n = element_count(dims)?;
    let payload = n.checked_mul(4).ok_or(NebiError::DimsOverflow)?;
    let mut out = Vec::with_capacity(7 + 8 * dims.len() + payload as usize);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(DTYPE_F32);
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in array.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<NdArray> {
    let truncated = |expected: u64| NebiError::Truncated {
        expected,
        found: bytes.len() as u64,
    };
    if bytes.len() < 4 {
        return Err(truncated(7));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(NebiError::BadMagic(magic));
    }
    if bytes.len() < 7 {
        return Err(truncated(7));
    }
    if bytes[4] != VERSION {
        return Err(NebiError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != DTYPE_F32 {
        return Err(NebiError::UnsupportedDtype(bytes[5]));
    }
    let ndim = bytes[6] as usize;
    let header = 7 + 8 * ndim as u64;
    if (bytes.len() as u64) < header {
        return Err(truncated(header));
    }
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let off = 7 + 8 * i;
        let d = u64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
        dims.push(usize::try_from(d).map_err(|_| NebiError::DimsOverflow)?);
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(NebiError::InvalidDims(dims));
    }
    let n = element_count(&dims)?;
    let total = n
        .checked_mul(4)
        .and_then(|p| p.checked_add(header))
        .ok_or(NebiError::DimsOverflow)?;
    if (bytes.len() as u64) < total {
        return Err(truncated(total));
    }
    if (bytes.len() as u64) > total {
        return Err(NebiError::TrailingBytes(bytes.len() as u64 - total));
    }
    let data = bytes[header as usize..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    NdArray::new(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, array: &NdArray) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tensor(array)?;
    fs::write(path, bytes).map_err(|e| NebiError::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<NdArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| NebiError::io(path, e))?;
    decode_tensor(&bytes)
}
