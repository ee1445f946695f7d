use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::error::CliError;

/// Record of one run: enough to repeat it exactly with `csmark replay`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The fully resolved command line, defaults filled in.
    pub invocation: Command,
    pub seed: Option<u64>,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
    pub wall_time_secs: f64,
    pub acceptance: Option<Acceptance>,
    /// Command-specific facts, e.g. tuned step sizes or sweep order.
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Acceptance {
    pub accept_z: f64,
    pub accept_tau: f64,
}

impl RunManifest {
    pub fn new(invocation: Command, seed: Option<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            invocation,
            seed,
            artifacts: Vec::new(),
            wall_time_secs: 0.0,
            acceptance: None,
            details: serde_json::Value::Null,
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.line(), e.to_string()))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
