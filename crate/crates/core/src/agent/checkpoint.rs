//! Network checkpoint files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field                | type                          |
//! |----------------------|-------------------------------|
//! | magic                | 8 bytes, `b"COINMLP\0"`       |
//! | version              | `u32` (currently 1)           |
//! | layer count `L`      | `u32`                         |
//! | widths               | `L + 1` × `u32`, input first  |
//! | activations          | `L` × `u8` (0 linear, 1 ReLU) |
//! | input dropout        | `f64`                         |
//! | per layer            | weights row-major, then biases, `f64` |
//!
//! Reading back a written file reproduces the network bit for bit.

use std::fs;
use std::path::Path;

use super::mlp::{Activation, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"COINMLP\0";
pub const VERSION: u32 = 1;

pub fn encode(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * net.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for w in net.sizes() {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.extend(net.layers.iter().map(|l| l.activation.code()));
    out.extend_from_slice(&net.input_dropout.to_le_bytes());
    for l in &net.layers {
        for v in l.weights.iter().chain(&l.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Mlp> {
    let mut r = Reader { bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let layers = r.u32()? as usize;
    if layers == 0 || layers > 1024 {
        return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
    }
    let sizes = (0..=layers).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let activations = r
        .take(layers)?
        .iter()
        .map(|&c| Activation::from_code(c).ok_or_else(|| Error::Checkpoint(format!("unknown activation {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let dropout = r.f64()?;
    let mut net = Mlp::zeros(&sizes, dropout).map_err(|e| Error::Checkpoint(e.to_string()))?;
    for (layer, act) in net.layers.iter_mut().zip(activations) {
        layer.activation = act;
        for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *v = r.f64()?;
        }
    }
    if !r.bytes.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.bytes.len())));
    }
    Ok(net)
}

pub fn save(net: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Mlp> {
    decode(&fs::read(path)?)
}
