//! The JSON envelope every command-line run writes.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output interval of one network output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutputBound {
    pub lower: f64,
    pub upper: f64,
}

/// Everything needed to reproduce a run. Only `elapsed_seconds` varies
/// between identical invocations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub model: String,
    /// SHA-256 of the spec file bytes, when the command reads one.
    pub spec_digest: Option<String>,
    pub status: String,
    pub bounds: Option<Vec<OutputBound>>,
    pub coverage: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub elapsed_seconds: f64,
    pub version: String,
    pub seed: Option<u64>,
    /// Budgets and options the run used.
    pub settings: serde_json::Value,
    /// Command-specific payload.
    pub details: serde_json::Value,
}

impl RunReport {
    pub fn new(command: &str, model: &str, status: &str) -> Self {
        Self {
            command: command.to_string(),
            model: model.to_string(),
            spec_digest: None,
            status: status.to_string(),
            bounds: None,
            coverage: None,
            witness: None,
            elapsed_seconds: 0.0,
            version: TOOL_VERSION.to_string(),
            seed: None,
            settings: serde_json::Value::Null,
            details: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

pub fn bounds_from_interval(lower: &[f64], upper: &[f64]) -> Vec<OutputBound> {
    lower
        .iter()
        .zip(upper)
        .map(|(&lower, &upper)| OutputBound { lower, upper })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
