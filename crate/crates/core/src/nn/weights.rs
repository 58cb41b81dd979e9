//! Binary weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"PFANWTS\0"
//! version  u32 (= 1)
//! dtype    u32 (0 = f32, 1 = f64)
//! meta     u32 length + UTF-8 bytes
//! count    u32
//! tensor*  u32 name length, name, u32 ndim, u64 dims, raw values
//! ```

use std::fs;
use std::path::Path;

use super::ParamStore;
use crate::tensor::{DType, Scalar, Tensor};

pub const MAGIC: &[u8; 8] = b"PFANWTS\0";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum WeightsError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a weight file (bad magic)")]
    BadMagic,
    #[error("unsupported weight file version {0}")]
    Version(u32),
    #[error("unknown dtype code {0}")]
    DType(u32),
    #[error("weight file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("weight file contains invalid UTF-8")]
    InvalidUtf8,
    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("unexpected parameter {0}")]
    UnexpectedParam(String),
    #[error("duplicate parameter name {0}")]
    DuplicateName(String),
    #[error("{0}")]
    Invalid(String),
}

pub fn encode_weights<T: Scalar>(store: &ParamStore<T>, metadata: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + store.count_params() * T::DTYPE.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&T::DTYPE.code().to_le_bytes());
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(metadata.as_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        t.data().iter().for_each(|v| v.write_le(&mut out));
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightsError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(WeightsError::Truncated {
                offset: self.bytes.len(),
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, WeightsError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, WeightsError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| WeightsError::InvalidUtf8)
    }
}

/// Decodes a weight file. Values stored in the other precision are converted.
pub fn decode_weights<T: Scalar>(bytes: &[u8]) -> Result<(ParamStore<T>, String), WeightsError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len()).map_err(|_| WeightsError::BadMagic)? != MAGIC {
        return Err(WeightsError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(WeightsError::Version(version));
    }
    let code = r.u32()?;
    let dtype = DType::from_code(code).ok_or(WeightsError::DType(code))?;
    let metadata = r.string()?;
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name = r.string()?;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(
                usize::try_from(r.u64()?).map_err(|_| WeightsError::Invalid(format!("{name}: extent overflow")))?,
            );
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| WeightsError::Invalid(format!("{name}: element count overflow")))?;
        let raw = r.take(
            numel
                .checked_mul(dtype.size())
                .ok_or(WeightsError::Truncated { offset: bytes.len() })?,
        )?;
        let data: Vec<T> = match dtype {
            DType::F32 => raw.chunks_exact(4).map(|c| T::lit(f32::read_le(c) as f64)).collect(),
            DType::F64 => raw.chunks_exact(8).map(|c| T::lit(f64::read_le(c))).collect(),
        };
        let t = Tensor::param(data, &shape).map_err(|e| WeightsError::Invalid(e.to_string()))?;
        store.insert(name, t)?;
    }
    if r.pos != bytes.len() {
        return Err(WeightsError::Invalid(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((store, metadata))
}

pub fn save_weights<T: Scalar>(
    store: &ParamStore<T>,
    metadata: &str,
    path: impl AsRef<Path>,
) -> Result<(), WeightsError> {
    fs::write(path, encode_weights(store, metadata))?;
    Ok(())
}

pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<(ParamStore<T>, String), WeightsError> {
    decode_weights(&fs::read(path)?)
}
