//! `FMNF` binary parameter format.
//!
//! ```text
//! "FMNF" | version u32 | layer count u32 | (rows u32, cols u32) * layers
//!        | per layer: rows*cols f64 weights (row-major), rows f64 biases
//! ```
//!
//! All integers and reals are little-endian.

use super::{Architecture, ParamVector};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FMNF";
pub const VERSION: u32 = 1;

pub fn encode(params: &ParamVector, arch: &Architecture) -> Result<Vec<u8>> {
    params.check_len("params", arch.param_count())?;
    let layers = arch.layers();
    let mut out = Vec::with_capacity(12 + 8 * layers.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in &layers {
        out.extend_from_slice(&(l.rows as u32).to_le_bytes());
        out.extend_from_slice(&(l.cols as u32).to_le_bytes());
    }
    // Canonical layout already is weights-then-bias per layer.
    for v in params.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: impl FnOnce() -> String) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated {} at byte offset {} (need {n} bytes, {} left)",
                what(),
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: impl FnOnce() -> String) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self, what: impl FnOnce() -> String) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Decode to the layer dims `[in, h1, ..., out]` and the flat parameters.
pub fn decode(bytes: &[u8]) -> Result<(Vec<usize>, ParamVector)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4, || "magic".into())?;
    if magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32(|| "version".into())?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
    }
    let count = r.u32(|| "layer count".into())? as usize;
    if count == 0 {
        return Err(Error::Checkpoint("layer count is zero".into()));
    }
    let mut shapes = Vec::with_capacity(count);
    for l in 0..count {
        let rows = r.u32(|| format!("shape of layer {l}"))? as usize;
        let cols = r.u32(|| format!("shape of layer {l}"))? as usize;
        if rows == 0 || cols == 0 {
            return Err(Error::Checkpoint(format!("layer {l} has a zero dimension")));
        }
        shapes.push((rows, cols));
    }
    let mut dims = vec![shapes[0].1];
    for (l, &(rows, cols)) in shapes.iter().enumerate() {
        if cols != *dims.last().unwrap() {
            return Err(Error::Checkpoint(format!(
                "layer {l} expects {cols} inputs but previous layer has {} outputs",
                dims.last().unwrap()
            )));
        }
        dims.push(rows);
    }
    let mut values = Vec::new();
    for (l, &(rows, cols)) in shapes.iter().enumerate() {
        for _ in 0..rows * cols + rows {
            values.push(r.f64(|| format!("parameters of layer {l}"))?);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after offset {}",
            bytes.len() - r.pos,
            r.pos
        )));
    }
    Ok((dims, ParamVector::new(values)))
}
