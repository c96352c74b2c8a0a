//! HTTP/JSON service over the volt/var toolkit.
//!
//! Endpoints (all JSON):
//!
//! - `GET  /health`
//! - `POST /api/v1/validate` — scenario or rulebase diagnostics
//! - `POST /api/v1/infer` — one-shot inference with intermediates
//! - `POST /api/v1/run` — execute a scenario, artifacts land on the
//!   server's filesystem
//! - `GET  /api/v1/runs` — runs executed by this instance
//! - `GET  /api/v1/runs/{id}`
//! - `POST /api/v1/compare` — comparison report over run directories
//!
//! Relative paths in requests resolve against the server's working
//! directory (or `--data-dir`).

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};

use vvc_core::api::{
    ApiError, CompareRequest, CompareResponse, HealthResponse, InferRequest, InferResponse,
    RuleActivation, RulebaseSummary, RunRecord, RunRequest, RunResponse, ValidateRequest,
    ValidateResponse,
};
use vvc_core::metrics::render_text;
use vvc_core::rules::{format_rule, load_rulebase_files};
use vvc_core::scenario::{
    compare_runs_with_plots, load_scenario_with, run_scenario, validate_scenario, ErrorKind,
    ScenarioError, ScenarioOverrides,
};

pub struct AppState {
    data_dir: PathBuf,
    runs: Mutex<Vec<RunRecord>>,
}

impl AppState {
    pub fn new(data_dir: PathBuf) -> Arc<Self> {
        Arc::new(Self {
            data_dir,
            runs: Mutex::new(Vec::new()),
        })
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.data_dir.join(path)
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/v1/validate", post(validate))
        .route("/api/v1/infer", post(infer))
        .route("/api/v1/run", post(run))
        .route("/api/v1/runs", get(list_runs))
        .route("/api/v1/runs/:id", get(get_run))
        .route("/api/v1/compare", post(compare))
        .with_state(state)
}

/// Serve until the listener fails; binds before returning the future so
/// callers can learn the ephemeral port.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

struct Failure {
    status: StatusCode,
    body: ApiError,
}

impl Failure {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ApiError {
                kind: kind.into(),
                message: message.into(),
            },
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(err: ScenarioError) -> Self {
        let status = match err.kind() {
            ErrorKind::Config => StatusCode::BAD_REQUEST,
            ErrorKind::Io => StatusCode::NOT_FOUND,
            ErrorKind::Runtime => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            body: ApiError::from_scenario_error(&err),
        }
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

async fn health() -> Json<HealthResponse> {
    Json(HealthResponse {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn validate(
    State(state): State<Arc<AppState>>,
    Json(req): Json<ValidateRequest>,
) -> Result<Json<ValidateResponse>, Failure> {
    match (&req.scenario, &req.variables, &req.rules) {
        (Some(scenario), None, None) => {
            let path = state.resolve(scenario);
            let (diagnostics, summary) = validate_scenario(&path);
            Ok(Json(ValidateResponse {
                ok: diagnostics.is_empty(),
                diagnostics,
                summary: summary.map(|(rules, inputs, outputs)| RulebaseSummary {
                    rules,
                    inputs,
                    outputs,
                }),
            }))
        }
        (None, Some(variables), Some(rules)) => {
            match load_rulebase_files(&state.resolve(variables), &state.resolve(rules), None) {
                Ok(rb) => Ok(Json(ValidateResponse {
                    ok: true,
                    diagnostics: Vec::new(),
                    summary: Some(RulebaseSummary {
                        rules: rb.rules().len(),
                        inputs: rb.inputs().count(),
                        outputs: rb.outputs().count(),
                    }),
                })),
                Err(e) => Ok(Json(ValidateResponse {
                    ok: false,
                    diagnostics: e.issues.iter().map(|i| i.to_string()).collect(),
                    summary: None,
                })),
            }
        }
        _ => Err(Failure::new(
            StatusCode::BAD_REQUEST,
            "config",
            "provide either 'scenario' or both 'variables' and 'rules'",
        )),
    }
}

async fn infer(
    State(state): State<Arc<AppState>>,
    Json(req): Json<InferRequest>,
) -> Result<Json<InferResponse>, Failure> {
    let rb = load_rulebase_files(
        &state.resolve(&req.variables),
        &state.resolve(&req.rules),
        req.voltage_ref_kv,
    )
    .map_err(|e| {
        let kind = if e.has_io_issue() { "io" } else { "config" };
        let status = if e.has_io_issue() {
            StatusCode::NOT_FOUND
        } else {
            StatusCode::BAD_REQUEST
        };
        Failure::new(status, kind, e.to_string())
    })?;
    let trace = rb
        .infer_trace(&req.inputs)
        .map_err(|e| Failure::new(StatusCode::BAD_REQUEST, "config", e.to_string()))?;
    let activations = rb
        .rules()
        .iter()
        .zip(&trace.activations)
        .map(|(rule, &activation)| RuleActivation {
            rule: format_rule(rule),
            activation,
        })
        .collect();
    Ok(Json(InferResponse {
        fuzzified: trace.fuzzified,
        activations,
        outputs: trace.outputs,
    }))
}

async fn run(
    State(state): State<Arc<AppState>>,
    Json(req): Json<RunRequest>,
) -> Result<Json<RunResponse>, Failure> {
    let scenario_path = state.resolve(&req.scenario);
    let out_dir = state.resolve(&req.out);
    let overrides = ScenarioOverrides {
        seed: req.seed,
        voltage_ref_kv: req.voltage_ref_kv,
        controller: req.controller.clone(),
    };
    // simulation is CPU-bound; keep it off the async workers
    let artifacts = tokio::task::spawn_blocking(move || {
        let scn = load_scenario_with(&scenario_path, &overrides)?;
        run_scenario(&scn, &out_dir)
    })
    .await
    .map_err(|e| Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "runtime", e.to_string()))??;

    let id = {
        let mut runs = state.runs.lock().expect("runs lock");
        let id = format!("run-{:04}", runs.len() + 1);
        runs.push(RunRecord {
            id: id.clone(),
            scenario: artifacts.metrics.scenario.clone(),
            controller: artifacts.metrics.controller.clone(),
            out_dir: artifacts.out_dir.display().to_string(),
            samples: artifacts.metrics.samples,
        });
        id
    };
    Ok(Json(RunResponse {
        id,
        out_dir: artifacts.out_dir.display().to_string(),
        metrics: artifacts.metrics,
    }))
}

async fn list_runs(State(state): State<Arc<AppState>>) -> Json<Vec<RunRecord>> {
    Json(state.runs.lock().expect("runs lock").clone())
}

async fn get_run(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<RunRecord>, Failure> {
    state
        .runs
        .lock()
        .expect("runs lock")
        .iter()
        .find(|r| r.id == id)
        .cloned()
        .map(Json)
        .ok_or_else(|| {
            Failure::new(
                StatusCode::NOT_FOUND,
                "not_found",
                format!("no run named '{id}'"),
            )
        })
}

async fn compare(
    State(state): State<Arc<AppState>>,
    Json(req): Json<CompareRequest>,
) -> Result<Json<CompareResponse>, Failure> {
    let dirs: Vec<PathBuf> = req.runs.iter().map(|r| state.resolve(r)).collect();
    let baseline = req.baseline;
    let plots_dir = req.plots_out.as_ref().map(|p| state.resolve(p));
    let (report, plots) = tokio::task::spawn_blocking(move || {
        compare_runs_with_plots(&dirs, baseline, plots_dir.as_deref())
    })
    .await
    .map_err(|e| Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "runtime", e.to_string()))??;
    let text = render_text(&report);
    Ok(Json(CompareResponse {
        report,
        text,
        plots: plots.iter().map(|p| p.display().to_string()).collect(),
    }))
}
