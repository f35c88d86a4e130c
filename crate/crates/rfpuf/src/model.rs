//! The trained model on disk: a JSON document carrying the network, the
//! feature order it expects and the normalization fitted at training time.

use std::path::Path;

use rfpuf_core::ann::MlpModel;
use rfpuf_core::features::{NormalizationParams, FEATURE_NAMES};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MODEL_FILE: &str = "model.json";
pub const MODEL_FORMAT: &str = "rfpuf-mlp";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub normalization: NormalizationParams,
    pub model: MlpModel,
}

impl ModelFile {
    pub fn new(model: MlpModel, normalization: NormalizationParams) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            normalization,
            model,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("model serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_json(path: &Path, bytes: &[u8]) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_slice(bytes).map_err(|e| HarnessError::format(path, e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(HarnessError::format(
                path,
                format!("unsupported model format {} v{}", file.format, file.version),
            ));
        }
        if file.feature_names.iter().ne(FEATURE_NAMES.iter()) {
            return Err(HarnessError::format(
                path,
                "feature names do not match this build",
            ));
        }
        file.model
            .validate()
            .map_err(|e| HarnessError::format(path, e.to_string()))?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(path, &bytes)
    }
}
