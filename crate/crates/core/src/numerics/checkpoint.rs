//! Binary checkpoint: `SASN`, version byte `1`, `d_a` and `d_r` as u32 LE,
//! then every tensor in [`ParamId::ALL`] order as row-major f64 LE.

use std::path::Path;

use super::{ParamId, ParameterStore};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SASN";
const VERSION: u8 = 1;

pub fn write_checkpoint(params: &ParameterStore) -> Vec<u8> {
    let total: usize = params.iter().map(|(_, t)| t.len()).sum();
    let mut out = Vec::with_capacity(13 + 8 * total);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(params.d_a() as u32).to_le_bytes());
    out.extend_from_slice(&(params.d_r() as u32).to_le_bytes());
    for (_, tensor) in params.iter() {
        // logical row-major order regardless of memory layout
        for v in tensor.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ParameterStore> {
    if bytes.len() < 13 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {}",
            bytes[4]
        )));
    }
    let d_a = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let d_r = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let mut params =
        ParameterStore::zeros(d_a, d_r).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let expected: usize = params.iter().map(|(_, t)| t.len()).sum::<usize>() * 8;
    let payload = &bytes[13..];
    if payload.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} payload bytes for d_a={d_a}, d_r={d_r}, found {}",
            payload.len()
        )));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for id in ParamId::ALL {
        for v in params.get_mut(id).iter_mut() {
            *v = values.next().unwrap();
        }
        if params.get(id).iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!(
                "non-finite value in {}",
                id.name()
            )));
        }
    }
    if params.sim_w() <= 0.0 {
        return Err(Error::Checkpoint(format!(
            "sim_w must be positive, found {}",
            params.sim_w()
        )));
    }
    Ok(params)
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ParameterStore) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParameterStore> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
