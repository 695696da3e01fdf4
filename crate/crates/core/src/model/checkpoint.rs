use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{HdgcnConfig, HdgcnModel};

pub const CHECKPOINT_FORMAT: &str = "hdgcn-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ParamBlob {
    name: String,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

/// Serialised model: config echo, caller metadata and named parameter blobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub config: HdgcnConfig,
    /// Free-form run description stored alongside the weights.
    #[serde(default)]
    pub metadata: serde_json::Value,
    params: Vec<ParamBlob>,
}

impl Checkpoint {
    pub fn from_model(model: &HdgcnModel, metadata: serde_json::Value) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: VERSION,
            config: model.config().clone(),
            metadata,
            params: model
                .params
                .iter()
                .map(|p| ParamBlob {
                    name: p.name.clone(),
                    rows: p.value.rows(),
                    cols: p.value.cols(),
                    values: p.value.as_slice().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Corrupt(format!("checkpoint: {e}")))?;
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != VERSION {
            return Err(Error::Corrupt(format!(
                "unsupported checkpoint format {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Corrupt("checkpoint is not UTF-8".into()))?;
        Self::from_json(&text)
    }

    /// Rebuilds the model; every stored blob must match the layout implied
    /// by the config exactly.
    pub fn to_model(&self) -> Result<HdgcnModel> {
        self.config
            .validate()
            .map_err(|e| Error::Corrupt(format!("stored config invalid: {e}")))?;
        let mut model = HdgcnModel::new(self.config.clone(), 0)?;
        if model.params.len() != self.params.len() {
            return Err(Error::Corrupt(format!(
                "expected {} parameters, found {}",
                model.params.len(),
                self.params.len()
            )));
        }
        for blob in &self.params {
            let id = model
                .params
                .find(&blob.name)
                .ok_or_else(|| Error::Corrupt(format!("unexpected parameter `{}`", blob.name)))?;
            let slot = &mut model.params.get_mut(id).value;
            if slot.shape() != (blob.rows, blob.cols) {
                return Err(Error::Corrupt(format!(
                    "parameter `{}` has shape {:?}, expected {:?}",
                    blob.name,
                    (blob.rows, blob.cols),
                    slot.shape()
                )));
            }
            let value =
                Tensor::from_vec(blob.rows, blob.cols, blob.values.clone()).map_err(|_| {
                    Error::Corrupt(format!("parameter `{}` has wrong length", blob.name))
                })?;
            if !value.is_finite() {
                return Err(Error::Corrupt(format!(
                    "parameter `{}` is not finite",
                    blob.name
                )));
            }
            *slot = value;
        }
        Ok(model)
    }

    /// Rejects a checkpoint whose config differs from `expected`.
    pub fn ensure_config(&self, expected: &HdgcnConfig) -> Result<()> {
        if &self.config != expected {
            return Err(Error::Config(format!(
                "checkpoint config {:?} does not match expected {:?}",
                self.config, expected
            )));
        }
        Ok(())
    }
}
