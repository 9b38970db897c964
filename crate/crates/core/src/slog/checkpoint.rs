//! Model checkpoints: `model.json` metadata next to a raw `params.f64le`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{LayerParams, SlogModel};
use crate::error::{Error, Result};
use crate::io::{read_f64le, write_atomic, write_f64le};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MODEL_FILE: &str = "model.json";
pub const PARAMS_FILE: &str = "params.f64le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub n_params: usize,
    /// Field order of each layer's block in the parameter file.
    pub layout: Vec<String>,
    /// Free-form provenance: configs that produced the model.
    #[serde(default)]
    pub meta: serde_json::Value,
}

fn layout() -> Vec<String> {
    [
        "rho1", "rho2", "alpha1", "alpha2", "tau", "beta1", "beta2", "beta3", "gamma", "M (column-major)", "m",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

pub fn save_checkpoint(model: &SlogModel, dir: &Path, meta: &serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_f64le(&dir.join(PARAMS_FILE), &model.to_flat())?;
    let header = ModelHeader {
        format_version: CHECKPOINT_VERSION,
        n: model.n_nodes(),
        d: model.constraint_dim(),
        k: model.n_layers(),
        seed: model.seed,
        n_params: model.n_params(),
        layout: layout(),
        meta: meta.clone(),
    };
    let path = dir.join(MODEL_FILE);
    let json = serde_json::to_vec_pretty(&header).map_err(|e| Error::json(&path, e))?;
    write_atomic(&path, &json)
}

pub fn load_checkpoint(dir: &Path) -> Result<(SlogModel, ModelHeader)> {
    let path = dir.join(MODEL_FILE);
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_slice(&text).map_err(|e| Error::json(&path, e))?;
    let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header: ModelHeader = serde_json::from_value(value).map_err(|e| Error::json(&path, e))?;
    let per = LayerParams::n_params(header.n, header.d);
    let flat = read_f64le(&dir.join(PARAMS_FILE), per * header.k)?;
    let layers = flat
        .chunks_exact(per)
        .map(|c| LayerParams::read_flat(c, header.n, header.d))
        .collect::<Result<Vec<_>>>()?;
    let model = SlogModel::from_layers(layers, header.seed)?;
    Ok((model, header))
}
