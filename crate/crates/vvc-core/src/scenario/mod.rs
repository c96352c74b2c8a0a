//! Scenario configuration, the closed-loop runner and run artifacts.
//!
//! A scenario JSON names the plant, the controller, the rulebase files and
//! the input profiles; all paths are resolved relative to the scenario
//! file's directory. A run writes, into its output directory:
//!
//! - `telemetry.csv` — every quantized sample
//! - `voltage.csv`, `pf.csv`, `p_mw.csv`, `q_mvar.csv` — plot-ready
//!   `timestamp,value` profiles
//! - `actions.csv` — non-noop control actions
//! - `events.jsonl` — controller event log
//! - `metrics.json` — the run's summary metrics
//!
//! Runs are deterministic: the same scenario and seed produce byte-identical
//! files.

mod runner;

pub use runner::{
    compare_runs, compare_runs_with_plots, load_run, run_scenario, RunArtifacts, RunData,
    RunMetrics,
};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlError, DeadbandParams, FisParams, Schedule};
use crate::fis::RuleBase;
use crate::metrics::MetricsError;
use crate::plant::{HvProfile, LoadProfile, PlantConfig, PlantError};
use crate::rules::{load_rulebase_files, LoadError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("configuration: {message}")]
    Config { message: String },
    #[error("rulebase:\n{0}")]
    Rulebase(#[from] LoadError),
    #[error(transparent)]
    Profile(#[from] crate::plant::ProfileError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Coarse classification used for process exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Io,
    Runtime,
}

impl ScenarioError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ScenarioError::Io { .. } => ErrorKind::Io,
            ScenarioError::Rulebase(e) if e.has_io_issue() => ErrorKind::Io,
            ScenarioError::Json { .. }
            | ScenarioError::Config { .. }
            | ScenarioError::Rulebase(_)
            | ScenarioError::Profile(_) => ErrorKind::Config,
            ScenarioError::Plant(_) | ScenarioError::Control(_) | ScenarioError::Metrics(_) => {
                ErrorKind::Runtime
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerConfig {
    Fis(FisParams),
    Deadband(DeadbandConfig),
    OpfProxy(OpfConfig),
}

impl ControllerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerConfig::Fis(_) => "fis",
            ControllerConfig::Deadband(_) => "deadband",
            ControllerConfig::OpfProxy(_) => "opf_proxy",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DeadbandConfig {
    /// Defaults to the scenario's voltage reference.
    pub reference_kv: Option<f64>,
    pub deadband_kv: f64,
    pub samples_to_act: u32,
}

impl Default for DeadbandConfig {
    fn default() -> Self {
        let d = DeadbandParams::default();
        Self {
            reference_kv: None,
            deadband_kv: d.deadband_kv,
            samples_to_act: d.samples_to_act,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OpfConfig {
    pub period_minutes: f64,
    pub weight_voltage: f64,
    pub weight_reactive: f64,
    pub improvement_threshold: f64,
    /// Defaults to the scenario's voltage reference.
    pub target_kv: Option<f64>,
    pub overnight_hold: bool,
    pub night_start: String,
    pub night_end: String,
}

impl Default for OpfConfig {
    fn default() -> Self {
        Self {
            period_minutes: 15.0,
            weight_voltage: 1.0,
            weight_reactive: 0.05,
            improvement_threshold: 0.005,
            target_kv: None,
            overnight_hold: true,
            night_start: "22:00".into(),
            night_end: "09:00".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub on_peak: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RulebasePaths {
    pub variables: PathBuf,
    pub rules: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Adds the +-50 V SCADA dither before quantization.
    #[serde(default)]
    pub noise: bool,
    #[serde(default = "default_ref_kv")]
    pub voltage_ref_kv: f64,
    pub controller: ControllerConfig,
    /// Required for the fis controller, ignored by the baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rulebase: Option<RulebasePaths>,
    pub load_profile: PathBuf,
    pub hv_profile: PathBuf,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub initial_tap: i32,
    #[serde(default)]
    pub initial_breaker_closed: bool,
    #[serde(default)]
    pub plant: PlantConfig,
}

fn default_seed() -> u64 {
    0
}

fn default_ref_kv() -> f64 {
    21.0
}

/// A scenario with every referenced file loaded and cross-checked.
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    /// Directory of the scenario file; relative paths were resolved here.
    pub dir: PathBuf,
    pub rulebase: Option<Arc<RuleBase>>,
    pub load: LoadProfile,
    pub hv: HvProfile,
    pub schedule: Schedule,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let src = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&src).map_err(|e| ScenarioError::Json {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn steps(&self) -> Result<usize, ScenarioError> {
        let seconds = (self.end - self.start).num_seconds();
        let step = self.plant.step_seconds;
        if seconds <= 0 {
            return Err(ScenarioError::Config {
                message: "end must be after start".into(),
            });
        }
        if step <= 0.0 {
            return Err(ScenarioError::Config {
                message: "step_seconds must be positive".into(),
            });
        }
        Ok((seconds as f64 / step).floor() as usize)
    }
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Command-line / request-level overrides applied before loading.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOverrides {
    pub seed: Option<u64>,
    pub voltage_ref_kv: Option<f64>,
    /// Switch to this controller (`fis`, `deadband`, `opf_proxy`) with
    /// default parameters.
    pub controller: Option<String>,
}

/// Load a scenario file and everything it references.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    load_scenario_with(path, &ScenarioOverrides::default())
}

/// Load a scenario with overrides applied before any referenced file is
/// resolved, so a changed voltage reference retargets the rulebase.
pub fn load_scenario_with(
    path: &Path,
    overrides: &ScenarioOverrides,
) -> Result<LoadedScenario, ScenarioError> {
    let mut config = ScenarioConfig::from_path(path)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(kv) = overrides.voltage_ref_kv {
        config.voltage_ref_kv = kv;
    }
    if let Some(kind) = &overrides.controller {
        config.controller = match kind.as_str() {
            "fis" => ControllerConfig::Fis(FisParams::default()),
            "deadband" => ControllerConfig::Deadband(DeadbandConfig::default()),
            "opf_proxy" => ControllerConfig::OpfProxy(OpfConfig::default()),
            other => {
                return Err(ScenarioError::Config {
                    message: format!(
                        "unknown controller '{other}' (expected fis, deadband or opf_proxy)"
                    ),
                })
            }
        };
    }
    let dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    config.steps()?;

    let schedule = Schedule::from_windows(&config.schedule.on_peak)?;
    let rulebase = match (&config.controller, &config.rulebase) {
        (ControllerConfig::Fis(_), Some(paths)) => Some(Arc::new(load_rulebase_files(
            &resolve(&dir, &paths.variables),
            &resolve(&dir, &paths.rules),
            Some(config.voltage_ref_kv),
        )?)),
        (ControllerConfig::Fis(_), None) => {
            return Err(ScenarioError::Config {
                message: "the fis controller needs a rulebase".into(),
            });
        }
        // baselines ignore an unused rulebase silently
        _ => None,
    };
    let load = LoadProfile::from_path(&resolve(&dir, &config.load_profile))?;
    let hv = HvProfile::from_path(&resolve(&dir, &config.hv_profile))?;

    config.plant.check_tap(config.initial_tap)?;

    Ok(LoadedScenario {
        config,
        dir,
        rulebase,
        load,
        hv,
        schedule,
    })
}

/// Load everything a scenario references and report every problem found,
/// not just the first. Returns the diagnostics and, when the rulebase
/// loaded, its (rules, inputs, outputs) counts.
pub fn validate_scenario(path: &Path) -> (Vec<String>, Option<(usize, usize, usize)>) {
    let mut diagnostics = Vec::new();
    let config = match ScenarioConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => {
            diagnostics.push(e.to_string());
            return (diagnostics, None);
        }
    };
    let dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    if let Err(e) = config.steps() {
        diagnostics.push(e.to_string());
    }
    if let Err(e) = config.plant.check_tap(config.initial_tap) {
        diagnostics.push(format!("initial tap: {e}"));
    }
    if let Err(e) = Schedule::from_windows(&config.schedule.on_peak) {
        diagnostics.push(e.to_string());
    }

    let mut summary = None;
    match (&config.controller, &config.rulebase) {
        (ControllerConfig::Fis(_), Some(paths)) => {
            match load_rulebase_files(
                &resolve(&dir, &paths.variables),
                &resolve(&dir, &paths.rules),
                Some(config.voltage_ref_kv),
            ) {
                Ok(rb) => {
                    summary = Some((
                        rb.rules().len(),
                        rb.inputs().count(),
                        rb.outputs().count(),
                    ));
                }
                Err(e) => diagnostics.extend(e.issues.iter().map(|i| i.to_string())),
            }
        }
        (ControllerConfig::Fis(_), None) => {
            diagnostics.push("the fis controller needs a rulebase".into());
        }
        _ => {}
    }

    if let Err(e) = LoadProfile::from_path(&resolve(&dir, &config.load_profile)) {
        diagnostics.push(e.to_string());
    }
    if let Err(e) = HvProfile::from_path(&resolve(&dir, &config.hv_profile)) {
        diagnostics.push(e.to_string());
    }

    (diagnostics, summary)
}
