//! JSON checkpoints: bundle configuration plus every parameter as a named,
//! shaped, row-major array. Floats round-trip bit-exactly.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{BundleConfig, PredictorBundle};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct NamedArray {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: BundleConfig,
    params: Vec<NamedArray>,
}

const FORMAT: &str = "devfeed-checkpoint-v1";

pub fn to_json(bundle: &PredictorBundle) -> Result<String> {
    let ckpt = Checkpoint {
        format: FORMAT.into(),
        config: bundle.config.clone(),
        params: bundle
            .params
            .iter()
            .map(|p| NamedArray {
                name: p.name.clone(),
                shape: [p.value.nrows(), p.value.ncols()],
                values: p.value.iter().copied().collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&ckpt)?)
}

pub fn from_json(text: &str) -> Result<PredictorBundle> {
    let ckpt: Checkpoint = serde_json::from_str(text)?;
    if ckpt.format != FORMAT {
        return Err(Error::Compatibility(format!("unknown checkpoint format {:?}", ckpt.format)));
    }
    let mut bundle = PredictorBundle::new(ckpt.config)?;
    if ckpt.params.len() != bundle.params.len() {
        return Err(Error::Compatibility(format!(
            "checkpoint has {} arrays, configuration expects {}",
            ckpt.params.len(),
            bundle.params.len()
        )));
    }
    for (slot, saved) in bundle.params.iter_mut().zip(ckpt.params) {
        let shape = (saved.shape[0], saved.shape[1]);
        if slot.name != saved.name || slot.value.dim() != shape {
            return Err(Error::Compatibility(format!(
                "array {} {:?} does not match expected {} {:?}",
                saved.name,
                shape,
                slot.name,
                slot.value.dim()
            )));
        }
        slot.value = Array2::from_shape_vec(shape, saved.values)
            .map_err(|e| Error::Compatibility(format!("array {}: {e}", saved.name)))?;
    }
    Ok(bundle)
}

pub fn save(bundle: &PredictorBundle, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json(bundle)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<PredictorBundle> {
    from_json(&fs::read_to_string(path)?)
}
