//! Binary weight snapshots.
//!
//! Layout: `b"XFSW"`, version `u32`, layer count `u32`, parameter count
//! `u32` (16 bytes total), then every parameter as a little-endian `f64` in
//! the order W1 (row-major), b1, W2, b2, ...

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"XFSW";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode<S: Scalar>(model: &Mlp<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * model.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    out.extend_from_slice(&(model.num_params() as u32).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_f64_lossy().to_le_bytes());
    }
    out
}

/// Decode a snapshot for a network with the given layer sizes.
pub fn decode<S: Scalar>(bytes: &[u8], layer_sizes: &[usize]) -> Result<Mlp<S>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Input("not a weight snapshot (bad magic)".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != VERSION {
        return Err(Error::Input(format!("unsupported snapshot version {version}")));
    }
    let mut model = Mlp::<S>::zeros(layer_sizes)?;
    let layers = word(8) as usize;
    let params = word(12) as usize;
    if layers != model.layers().len() || params != model.num_params() {
        return Err(Error::Input(format!(
            "snapshot holds {layers} layers / {params} parameters, architecture {layer_sizes:?} needs {} / {}",
            model.layers().len(),
            model.num_params()
        )));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * params {
        return Err(Error::Input(format!(
            "snapshot body is {} bytes, expected {}",
            body.len(),
            8 * params
        )));
    }
    for (dst, chunk) in model.params_mut().zip(body.chunks_exact(8)) {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::Input("snapshot contains a non-finite parameter".into()));
        }
        *dst = S::of(v);
    }
    Ok(model)
}

pub fn save<S: Scalar>(model: &Mlp<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load<S: Scalar>(path: impl AsRef<Path>, layer_sizes: &[usize]) -> Result<Mlp<S>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, layer_sizes)
}
