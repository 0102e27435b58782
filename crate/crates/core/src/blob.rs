//! The `HNT1` tensor container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  "HNT1"            4 bytes
//! rank   u32               4 bytes
//! dims   u64 x rank        8 * rank bytes
//! data   f32 x prod(dims)  row-major
//! ```
//!
//! Only rank 2 (`N x C`) and rank 4 (`N x C x H x W`) tensors are accepted,
//! every dimension must be positive, and every value finite.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"HNT1";

/// Dense `f32` tensor with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlob {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl TensorBlob {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_shape(&shape)?;
        let len = element_count(&shape)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} holds {len} values, data has {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Leading (sample) dimension.
    pub fn samples(&self) -> usize {
        self.shape[0]
    }

    /// Second (channel) dimension.
    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    /// `H * W` for rank 4, 1 for rank 2.
    pub fn spatial(&self) -> usize {
        self.shape[2..].iter().product()
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f32>) {
        (self.shape, self.data)
    }

    /// Number of bytes [`encode`] will produce.
    pub fn encoded_len(&self) -> usize {
        8 + 8 * self.shape.len() + 4 * self.data.len()
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.len() != 2 && shape.len() != 4 {
        return Err(Error::shape(format!(
            "rank {} not supported (expected 2 or 4)",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::shape(format!("zero dimension in {shape:?}")));
    }
    Ok(())
}

fn element_count(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::shape(format!("element count of {shape:?} overflows")))
}

/// Serialize a blob. Fails with the flat index of the first non-finite value.
pub fn encode(blob: &TensorBlob) -> Result<Vec<u8>> {
    if let Some(index) = blob.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut out = Vec::with_capacity(blob.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(blob.shape.len() as u32).to_le_bytes());
    for &d in &blob.shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in &blob.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(Error::Length { needed: n, available });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Parse a complete container. Trailing bytes after the payload are rejected.
pub fn decode(bytes: &[u8]) -> Result<TensorBlob> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"HNT1\"",
            &bytes[..bytes.len().min(4)]
        )));
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let rank = u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize;
    if rank != 2 && rank != 4 {
        return Err(Error::Format(format!("rank {rank} not supported")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let d = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        let d =
            usize::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds address space")))?;
        if d == 0 {
            return Err(Error::Format("zero dimension".into()));
        }
        shape.push(d);
    }
    let count = element_count(&shape).map_err(|e| Error::Format(format!("{e}")))?;
    let payload_len = count
        .checked_mul(4)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let payload = cur.take(payload_len)?;
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    TensorBlob::new(shape, data)
}
