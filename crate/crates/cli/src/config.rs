//! Experiment configs: `{"recipe", "seed", "output_dir"?, "params"?}`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{config, LabResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub recipe: String,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Recipe-specific parameter blocks; omitted fields take recipe defaults.
    #[serde(default)]
    pub params: Value,
}

impl ExperimentConfig {
    pub fn new(recipe: &str, seed: u64) -> Self {
        Self {
            recipe: recipe.into(),
            seed,
            output_dir: None,
            params: Value::Null,
        }
    }

    pub fn from_json(text: &str) -> LabResult<Self> {
        serde_json::from_str(text).map_err(|e| config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Decode a recipe's parameter object, filling defaults.
pub fn parse_params<P: DeserializeOwned + Default>(params: &Value) -> LabResult<P> {
    match params {
        Value::Null => Ok(P::default()),
        v => serde_json::from_value(v.clone()).map_err(|e| config(format!("invalid params: {e}"))),
    }
}
