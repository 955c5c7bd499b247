//! Model file: `MADIFF1`, a little-endian `u32` manifest length, the JSON
//! manifest, then every parameter tensor as little-endian `f32` in manifest
//! order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{DenoiserModel, ModelSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 7] = b"MADIFF1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    spec: ModelSpec,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

pub fn model_to_bytes(model: &DenoiserModel) -> Vec<u8> {
    let ps = model.params();
    let manifest = Manifest {
        spec: model.spec().clone(),
        tensors: (0..ps.len())
            .map(|i| TensorEntry {
                name: ps.name(i).to_string(),
                shape: ps.shape(i).to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + 4 * ps.scalar_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for i in 0..ps.len() {
        for &v in ps.tensor(i) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<DenoiserModel> {
    let bad = |m: &str| Error::ModelFile(m.to_string());
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("missing MADIFF1 magic"));
    }
    let mut len = [0u8; 4];
    len.copy_from_slice(&bytes[7..11]);
    let len = u32::from_le_bytes(len) as usize;
    let body = bytes.get(11..11 + len).ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest = serde_json::from_slice(body).map_err(|e| Error::ModelFile(format!("manifest: {e}")))?;
    let mut model = DenoiserModel::new(manifest.spec, 0)?;
    let ps = model.params_mut();
    if manifest.tensors.len() != ps.len() {
        return Err(bad("tensor count does not match architecture"));
    }
    let mut blob = &bytes[11 + len..];
    for (i, entry) in manifest.tensors.iter().enumerate() {
        if entry.name != ps.name(i) || entry.shape != ps.shape(i) {
            return Err(Error::ModelFile(format!(
                "tensor {i}: manifest has {} {:?}, architecture expects {} {:?}",
                entry.name,
                entry.shape,
                ps.name(i),
                ps.shape(i)
            )));
        }
        let n = ps.tensor(i).len();
        if blob.len() < 4 * n {
            return Err(bad("truncated parameter blob"));
        }
        for (k, v) in ps.tensor_mut(i).iter_mut().enumerate() {
            let mut w = [0u8; 4];
            w.copy_from_slice(&blob[4 * k..4 * k + 4]);
            *v = f32::from_le_bytes(w) as f64;
        }
        blob = &blob[4 * n..];
    }
    if !blob.is_empty() {
        return Err(bad("trailing bytes after parameter blob"));
    }
    if !ps.all_finite() {
        return Err(bad("non-finite parameter"));
    }
    Ok(model)
}

pub fn save_model(model: &DenoiserModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<DenoiserModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

/// Rounds every parameter to `f32`, the precision the file stores.
pub fn quantize_params(model: &mut DenoiserModel) {
    let ps = model.params_mut();
    for i in 0..ps.len() {
        for v in ps.tensor_mut(i) {
            *v = *v as f32 as f64;
        }
    }
}
