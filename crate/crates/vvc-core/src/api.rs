//! Wire types for the HTTP service and its clients.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;
use crate::scenario::{ErrorKind, RunMetrics, ScenarioError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
}

/// Validate either a full scenario or a bare rulebase pair.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidateRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rules: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RulebaseSummary {
    pub rules: usize,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub ok: bool,
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<RulebaseSummary>,
}

/// One-shot inference against a rulebase on disk, for debugging rule files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferRequest {
    pub variables: String,
    pub rules: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_ref_kv: Option<f64>,
    pub inputs: IndexMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleActivation {
    pub rule: String,
    pub activation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferResponse {
    pub fuzzified: IndexMap<String, IndexMap<String, f64>>,
    pub activations: Vec<RuleActivation>,
    pub outputs: IndexMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRequest {
    pub scenario: String,
    pub out: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltage_ref_kv: Option<f64>,
    /// Switch to the named controller (`fis`, `deadband`, `opf_proxy`) with
    /// its default parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResponse {
    pub id: String,
    pub out_dir: String,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub scenario: String,
    pub controller: String,
    pub out_dir: String,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRequest {
    pub runs: Vec<String>,
    #[serde(default)]
    pub baseline: usize,
    /// Directory to write the pairwise loss-ratio profile CSVs into.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plots_out: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareResponse {
    pub report: MetricsReport,
    pub text: String,
    /// Loss-ratio plot files written, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plots: Vec<String>,
}

/// Error body returned by the service; `kind` feeds the CLI exit codes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: String,
    pub message: String,
}

impl ApiError {
    pub fn from_scenario_error(err: &ScenarioError) -> Self {
        let kind = match err.kind() {
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
            ErrorKind::Runtime => "runtime",
        };
        Self {
            kind: kind.to_string(),
            message: err.to_string(),
        }
    }
}
