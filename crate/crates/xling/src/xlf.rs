//! `XLF1` tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "XLF1"  u32 section_count
//! per section:
//!   u32 name_len  name (UTF-8)
//!   u32 rank      rank x u32 dims
//!   product(dims) x f64 values, row-major
//! ```

use std::path::Path;

use xling_core::Matrix;

use crate::error::{Error, Result};
use crate::fsutil;

const MAGIC: &[u8; 4] = b"XLF1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self {
            name: name.into(),
            shape,
            values,
        }
    }

    pub fn vector(name: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len();
        Self::new(name, vec![n], values)
    }

    pub fn matrix(name: impl Into<String>, m: &Matrix) -> Self {
        Self::new(name, vec![m.rows(), m.dim()], m.as_slice().to_vec())
    }

    /// Rank-2 tensor as a [`Matrix`]. A `[0, d]` shape gives an empty matrix.
    pub fn to_matrix(&self, origin: &Path) -> Result<Matrix> {
        match self.shape.as_slice() {
            [rows, dim] if *dim > 0 => Matrix::new(*rows, *dim, self.values.clone())
                .map_err(|e| Error::format(origin, format!("section {}: {e}", self.name))),
            other => Err(Error::format(
                origin,
                format!("section {} has shape {other:?}, expected rows x dim", self.name),
            )),
        }
    }
}

pub fn encode(sections: &[Tensor]) -> Vec<u8> {
    let bytes: usize = sections.iter().map(|t| 12 + t.name.len() + 4 * t.shape.len() + 8 * t.values.len()).sum();
    let mut out = Vec::with_capacity(8 + bytes);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for t in sections {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    origin: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.origin,
                format!("truncated at byte offset {}", self.pos),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<Vec<Tensor>> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        origin,
    };
    if r.take(4)? != MAGIC {
        return Err(Error::format(origin, "missing XLF1 magic"));
    }
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let name_len = r.u32()?;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::format(origin, format!("section name at byte offset {at} is not UTF-8")))?
            .to_string();
        let rank = r.u32()?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| Error::format(origin, format!("section {name}: shape {shape:?} too large")))?;
        let raw = r.take(8 * n)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(Tensor { name, shape, values });
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            origin,
            format!("{} trailing bytes after last section", bytes.len() - r.pos),
        ));
    }
    Ok(out)
}

pub fn write(path: &Path, sections: &[Tensor]) -> Result<()> {
    fsutil::write_atomic(path, &encode(sections))
}

pub fn read(path: &Path) -> Result<Vec<Tensor>> {
    decode(&fsutil::read(path)?, path)
}

/// Reads a file holding exactly one section.
pub fn read_single(path: &Path) -> Result<Tensor> {
    let mut s = read(path)?;
    if s.len() != 1 {
        return Err(Error::format(path, format!("expected one section, found {}", s.len())));
    }
    Ok(s.pop().unwrap())
}
