use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sot_core::dataset::sha256_hex;

use crate::CliError;

pub const RUN_RECORD: &str = "run.json";

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

impl InputHash {
    pub fn of_file(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Provenance written next to every command's outputs. Holds no clock or
/// host data, so reruns produce the same bytes.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub seed_from_env: bool,
    pub args: Value,
    pub config: Value,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub summary: Value,
}

impl RunRecord {
    pub fn new(command: &'static str, config: &impl Serialize) -> Result<Self, CliError> {
        Ok(Self {
            tool: "sot",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: None,
            seed_from_env: std::env::var_os(crate::config::SEED_ENV).is_some(),
            args: Value::Null,
            config: serde_json::to_value(config).map_err(CliError::runtime)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: Value::Null,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(CliError::runtime)?;
        text.push('\n');
        crate::write_file(&dir.join(RUN_RECORD), text.as_bytes())
    }
}
