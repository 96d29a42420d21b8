//! Checkpoints: a versioned JSON manifest plus one raw little-endian blob per
//! parameter, in a directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "crawl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub dtype: Dtype,
    /// Free-form model description (the model config).
    pub config: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

fn encode(values: &[f64], dtype: Dtype) -> Vec<u8> {
    match dtype {
        Dtype::F32 => values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect(),
        Dtype::F64 => values.iter().flat_map(|&v| v.to_le_bytes()).collect(),
    }
}

fn decode(bytes: &[u8], dtype: Dtype) -> Vec<f64> {
    match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    }
}

/// Writes every parameter and buffer of `store` into `dir`.
pub fn save_checkpoint(dir: &Path, store: &ParamStore, config: serde_json::Value, dtype: Dtype) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tensors = Vec::new();
    for p in store.iter() {
        let file = format!("{}.bin", p.name);
        let path = dir.join(&file);
        fs::write(&path, encode(&p.value, dtype)).map_err(|e| Error::io(&path, e))?;
        tensors.push(TensorEntry {
            name: p.name.clone(),
            shape: p.shape.clone(),
            file,
            trainable: p.trainable,
        });
    }
    let manifest = Manifest {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        dtype,
        config,
        tensors,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if manifest.format != CHECKPOINT_FORMAT || manifest.version != CHECKPOINT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported checkpoint {} v{}",
            manifest.format, manifest.version
        )));
    }
    Ok(manifest)
}

/// Loads all blobs listed in the manifest into `store`, matching by name.
/// Every parameter of `store` must be present with the same shape.
pub fn load_checkpoint_into(dir: &Path, store: &mut ParamStore) -> Result<Manifest> {
    let manifest = read_manifest(dir)?;
    for p in store.iter_mut() {
        let entry = manifest
            .tensors
            .iter()
            .find(|t| t.name == p.name)
            .ok_or_else(|| Error::invalid(format!("checkpoint lacks parameter {}", p.name)))?;
        if entry.shape != p.shape {
            return Err(Error::invalid(format!(
                "parameter {} has shape {:?} in checkpoint, {:?} in model",
                p.name, entry.shape, p.shape
            )));
        }
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != p.value.len() * manifest.dtype.width() {
            return Err(Error::invalid(format!("blob {} has the wrong size", entry.file)));
        }
        p.value = decode(&bytes, manifest.dtype);
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_blobs_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ParamStore::new();
        let vals: Vec<f64> = [0.1f32, -3.5, 1e-7, 65504.0].iter().map(|&v| f64::from(v)).collect();
        store.add("a.weight", &[2, 2], vals.clone(), true);
        store.add("a.running_var", &[1], vec![f64::from(0.7f32)], false);
        save_checkpoint(dir.path(), &store, serde_json::json!({"d": 2}), Dtype::F32).unwrap();

        let mut other = store.clone();
        other.iter_mut().for_each(|p| p.value.iter_mut().for_each(|v| *v = 0.0));
        let m = load_checkpoint_into(dir.path(), &mut other).unwrap();
        assert_eq!(m.config["d"], 2);
        for (a, b) in store.iter().zip(other.iter()) {
            let ab: Vec<u64> = a.value.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.value.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
        let raw = std::fs::read(dir.path().join("a.weight.bin")).unwrap();
        assert_eq!(&raw[..4], &0.1f32.to_le_bytes());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = ParamStore::new();
        store.add("w", &[2], vec![1.0, 2.0], true);
        save_checkpoint(dir.path(), &store, serde_json::Value::Null, Dtype::F64).unwrap();
        let mut other = ParamStore::new();
        other.add("w", &[3], vec![0.0; 3], true);
        assert!(load_checkpoint_into(dir.path(), &mut other).is_err());
    }
}
