//! Model checkpoints: `manifest.json` naming one raw float32 little-endian
//! blob per parameter tensor.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{DigitalModel, PARAM_NAMES};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::optics::export::{read_f32_le, write_f32_le};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub sensor_n: usize,
    pub params: Vec<BlobEntry>,
    /// Free-form provenance, e.g. config hash and tool version.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

pub fn save_checkpoint(model: &DigitalModel, dir: &Path, meta: &BTreeMap<String, String>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut params = Vec::new();
    for (name, t) in PARAM_NAMES.iter().zip(model.params()) {
        let file = format!("{name}.f32");
        write_f32_le(&dir.join(&file), t.data())?;
        params.push(BlobEntry { name: name.to_string(), shape: t.shape().to_vec(), file });
    }
    let manifest =
        CheckpointManifest { version: CHECKPOINT_VERSION, sensor_n: model.sensor_n(), params, meta: meta.clone() };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(DigitalModel, CheckpointManifest)> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Err(Error::NotFound(path));
    }
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&path)?)?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!("unsupported checkpoint version {}", manifest.version)));
    }
    let mut tensors = Vec::new();
    for (entry, expected) in manifest.params.iter().zip(PARAM_NAMES) {
        if entry.name != expected {
            return Err(Error::Validation(format!("checkpoint entry {} where {expected} expected", entry.name)));
        }
        let data = read_f32_le(&dir.join(&entry.file))?;
        tensors.push(Tensor::new(entry.shape.clone(), data)?);
    }
    let model = DigitalModel::from_tensors(manifest.sensor_n, tensors)?;
    Ok((model, manifest))
}
