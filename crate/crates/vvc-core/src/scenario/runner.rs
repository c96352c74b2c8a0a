//! Closed-loop execution of a loaded scenario and the run artifact formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveTime, SecondsFormat, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    ControllerConfig, DeadbandConfig, LoadedScenario, OpfConfig, ScenarioError,
};
use crate::control::{
    ControlAction, Controller, DeadbandController, DeadbandParams, FisController, OpfParams,
    OpfProxyController,
};
use crate::metrics::{
    comparison_report, load_series_csv, CvrFactors, MetricsReport, RunSummary, SeriesSample,
    VoltageStats,
};
use crate::plant::{self, PlantConfig, PlantState, TelemetrySample};

/// Summary metrics of one run, persisted as `metrics.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub controller: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub step_seconds: f64,
    pub samples: usize,
    pub seed: u64,
    pub voltage_ref_kv: f64,
    pub voltage: VoltageStats,
    pub p_mean_mw: f64,
    pub q_mean_mvar: f64,
    pub pf_at_least_098: f64,
    pub pf_at_least_099: f64,
    pub tap_operations: u64,
    pub capacitor_operations: u64,
    /// Telemetry samples outside the configured operating limits.
    pub limit_violations: usize,
    pub ce_scheduled_kwh: f64,
    pub ce_delivered_kwh: f64,
    pub ce_backlog_end_kwh: f64,
    pub ce_peak_mw: f64,
}

impl RunMetrics {
    pub fn label(&self) -> String {
        format!("{}:{}", self.scenario, self.controller)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            name: self.label(),
            samples: self.samples,
            voltage: self.voltage,
            p_mean_mw: self.p_mean_mw,
            q_mean_mvar: self.q_mean_mvar,
            pf_at_least_098: self.pf_at_least_098,
            pf_at_least_099: self.pf_at_least_099,
            tap_operations: self.tap_operations,
            capacitor_operations: self.capacitor_operations,
        }
    }
}

/// Where a run landed on disk plus its metrics.
#[derive(Debug, Clone, Serialize)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub metrics: RunMetrics,
}

fn build_controller(scn: &LoadedScenario) -> Result<Box<dyn Controller>, ScenarioError> {
    let cfg = &scn.config;
    match &cfg.controller {
        ControllerConfig::Fis(params) => {
            let rulebase = scn.rulebase.clone().ok_or_else(|| ScenarioError::Config {
                message: "the fis controller needs a rulebase".into(),
            })?;
            Ok(Box::new(FisController::new(
                rulebase,
                scn.schedule.clone(),
                params,
            )?))
        }
        ControllerConfig::Deadband(db) => {
            let DeadbandConfig {
                reference_kv,
                deadband_kv,
                samples_to_act,
            } = db.clone();
            Ok(Box::new(DeadbandController::new(DeadbandParams {
                reference_kv: reference_kv.unwrap_or(cfg.voltage_ref_kv),
                deadband_kv,
                samples_to_act,
            })))
        }
        ControllerConfig::OpfProxy(opf) => {
            let params = opf_params(opf, cfg.voltage_ref_kv, cfg.plant.step_seconds)?;
            Ok(Box::new(OpfProxyController::new(params, cfg.plant.clone())))
        }
    }
}

fn opf_params(
    opf: &OpfConfig,
    default_target: f64,
    step_seconds: f64,
) -> Result<OpfParams, ScenarioError> {
    let parse_time = |s: &str| {
        NaiveTime::parse_from_str(s, "%H:%M").map_err(|e| ScenarioError::Config {
            message: format!("night window '{s}': {e}"),
        })
    };
    Ok(OpfParams {
        period_steps: ((opf.period_minutes * 60.0 / step_seconds).round() as u32).max(1),
        weight_voltage: opf.weight_voltage,
        weight_reactive: opf.weight_reactive,
        improvement_threshold: opf.improvement_threshold,
        target_kv: opf.target_kv.unwrap_or(default_target),
        overnight_hold: opf.overnight_hold,
        night_start: parse_time(&opf.night_start)?,
        night_end: parse_time(&opf.night_end)?,
    })
}

fn ts(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

struct Writers {
    telemetry: BufWriter<File>,
    voltage: BufWriter<File>,
    pf: BufWriter<File>,
    p: BufWriter<File>,
    q: BufWriter<File>,
    actions: BufWriter<File>,
    events: BufWriter<File>,
}

impl Writers {
    fn create(out_dir: &Path) -> std::io::Result<Self> {
        let file = |name: &str| -> std::io::Result<BufWriter<File>> {
            Ok(BufWriter::new(File::create(out_dir.join(name))?))
        };
        let mut w = Self {
            telemetry: file("telemetry.csv")?,
            voltage: file("voltage.csv")?,
            pf: file("pf.csv")?,
            p: file("p_mw.csv")?,
            q: file("q_mvar.csv")?,
            actions: file("actions.csv")?,
            events: file("events.jsonl")?,
        };
        writeln!(w.telemetry, "timestamp,voltage_kv,p_mw,q_mvar,tap,breaker,pf")?;
        for plot in [&mut w.voltage, &mut w.pf, &mut w.p, &mut w.q] {
            writeln!(plot, "timestamp,value")?;
        }
        writeln!(w.actions, "timestamp,tap_delta,capacitor")?;
        Ok(w)
    }

    fn record(
        &mut self,
        sample: &TelemetrySample,
        action: &ControlAction,
        events: &[crate::control::ControllerEvent],
    ) -> std::io::Result<()> {
        let t = ts(sample.timestamp);
        let pf = sample.power_factor.unwrap_or(1.0);
        writeln!(
            self.telemetry,
            "{t},{:.4},{:.2},{:.2},{},{},{:.6}",
            sample.voltage_kv,
            sample.p_mw,
            sample.q_mvar,
            sample.tap,
            u8::from(sample.breaker_closed),
            pf
        )?;
        writeln!(self.voltage, "{t},{:.4}", sample.voltage_kv)?;
        writeln!(self.pf, "{t},{pf:.6}")?;
        writeln!(self.p, "{t},{:.4}", sample.p_mw)?;
        writeln!(self.q, "{t},{:.4}", sample.q_mvar)?;
        if !action.is_noop() {
            let cap = match action.capacitor {
                crate::control::CapacitorOrder::Connect => "connect",
                crate::control::CapacitorOrder::Disconnect => "disconnect",
                crate::control::CapacitorOrder::Hold => "hold",
            };
            writeln!(self.actions, "{t},{},{cap}", action.tap_delta)?;
        }
        for event in events {
            writeln!(self.events, "{}", serde_json::to_string(event)?)?;
        }
        Ok(())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.telemetry.flush()?;
        self.voltage.flush()?;
        self.pf.flush()?;
        self.p.flush()?;
        self.q.flush()?;
        self.actions.flush()?;
        self.events.flush()
    }
}

/// Execute the scenario and write all artifacts into `out_dir`.
///
/// Failures mid-run leave a `FAILED` marker file next to whatever partial
/// output exists.
pub fn run_scenario(scn: &LoadedScenario, out_dir: &Path) -> Result<RunArtifacts, ScenarioError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ScenarioError::Io {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    match run_inner(scn, out_dir) {
        Ok(artifacts) => Ok(artifacts),
        Err(e) => {
            let _ = std::fs::write(
                out_dir.join("FAILED"),
                format!("run aborted: {e}\npartial output may be incomplete\n"),
            );
            Err(e)
        }
    }
}

fn run_inner(scn: &LoadedScenario, out_dir: &Path) -> Result<RunArtifacts, ScenarioError> {
    let cfg = &scn.config;
    let steps = cfg.steps()?;
    let mut plant_cfg: PlantConfig = cfg.plant.clone();
    plant_cfg.noise_volts = if cfg.noise {
        if plant_cfg.noise_volts > 0.0 {
            plant_cfg.noise_volts
        } else {
            50.0
        }
    } else {
        0.0
    };

    let mut controller = build_controller(scn)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = PlantState::new(cfg.initial_tap, cfg.initial_breaker_closed, cfg.start);

    let io_err = |e: std::io::Error| ScenarioError::Io {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    };
    let mut writers = Writers::create(out_dir).map_err(io_err)?;

    let mut voltage_sum = 0.0;
    let mut abs_dev_sum = 0.0;
    let mut max_dev = 0.0f64;
    let mut p_sum = 0.0;
    let mut q_sum = 0.0;
    let mut pf_098 = 0usize;
    let mut pf_099 = 0usize;
    let mut limit_violations = 0usize;
    let mut ce_scheduled = 0.0;
    let mut ce_delivered = 0.0;
    let mut ce_peak_mw = 0.0f64;
    let mut previous: Option<TelemetrySample> = None;

    for _ in 0..steps {
        let t = state.clock;
        let point = scn.load.sample(t);
        let hv_kv = scn.hv.sample(t);
        let action = match &previous {
            Some(sample) => controller.decide(sample)?,
            None => ControlAction::HOLD,
        };
        let (next, sample, detail) =
            plant::step(&state, &action, &point, hv_kv, &plant_cfg, &mut rng)?;

        voltage_sum += sample.voltage_kv;
        let dev = (sample.voltage_kv - cfg.voltage_ref_kv).abs();
        abs_dev_sum += dev;
        max_dev = max_dev.max(dev);
        p_sum += sample.p_mw;
        q_sum += sample.q_mvar;
        let pf_mag = sample.power_factor.map_or(1.0, f64::abs);
        if pf_mag >= 0.98 {
            pf_098 += 1;
        }
        if pf_mag >= 0.99 {
            pf_099 += 1;
        }
        if sample.voltage_kv < plant_cfg.low_limit_kv || sample.voltage_kv > plant_cfg.high_limit_kv
        {
            limit_violations += 1;
        }
        ce_scheduled += point.pe_kwh;
        ce_delivered += detail.load.ce_delivered_kwh;
        ce_peak_mw = ce_peak_mw.max(detail.load.ce_p_mw);

        writers
            .record(&sample, &action, &controller.take_events())
            .map_err(io_err)?;
        previous = Some(sample);
        state = next;
    }
    writers.flush().map_err(io_err)?;

    let n = steps as f64;
    let metrics = RunMetrics {
        scenario: cfg.name.clone(),
        controller: controller.name().to_string(),
        start: cfg.start,
        end: cfg.end,
        step_seconds: plant_cfg.step_seconds,
        samples: steps,
        seed: cfg.seed,
        voltage_ref_kv: cfg.voltage_ref_kv,
        voltage: VoltageStats {
            mean_kv: voltage_sum / n,
            max_deviation_kv: max_dev,
            mean_deviation_kv: abs_dev_sum / n,
            reference_kv: cfg.voltage_ref_kv,
        },
        p_mean_mw: p_sum / n,
        q_mean_mvar: q_sum / n,
        pf_at_least_098: pf_098 as f64 / n,
        pf_at_least_099: pf_099 as f64 / n,
        tap_operations: state.tap_operations,
        capacitor_operations: state.breaker_operations,
        limit_violations,
        ce_scheduled_kwh: ce_scheduled,
        ce_delivered_kwh: ce_delivered,
        ce_backlog_end_kwh: state.ce_backlog_kwh,
        ce_peak_mw,
    };
    let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    std::fs::write(out_dir.join("metrics.json"), json + "\n").map_err(io_err)?;

    Ok(RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        metrics,
    })
}

/// A run read back from its output directory.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub metrics: RunMetrics,
    pub pf: Vec<SeriesSample>,
    pub voltage: Vec<SeriesSample>,
}

/// Re-parse a run directory through the same loaders the toolkit ships.
pub fn load_run(dir: &Path) -> Result<RunData, ScenarioError> {
    let metrics_path = dir.join("metrics.json");
    let src = std::fs::read_to_string(&metrics_path).map_err(|e| ScenarioError::Io {
        path: metrics_path.display().to_string(),
        message: e.to_string(),
    })?;
    let metrics: RunMetrics = serde_json::from_str(&src).map_err(|e| ScenarioError::Json {
        path: metrics_path.display().to_string(),
        message: e.to_string(),
    })?;
    let pf = load_series_csv(&dir.join("pf.csv"))?;
    let voltage = load_series_csv(&dir.join("voltage.csv"))?;
    Ok(RunData {
        dir: dir.to_path_buf(),
        metrics,
        pf,
        voltage,
    })
}

/// Compare two or more runs with aligned horizons; index `baseline` is the
/// reference the others are measured against.
pub fn compare_runs(dirs: &[PathBuf], baseline: usize) -> Result<MetricsReport, ScenarioError> {
    Ok(compare_runs_with_plots(dirs, baseline, None)?.0)
}

/// As [`compare_runs`], optionally writing a plot-ready loss-ratio profile
/// CSV per pair into `plots_dir`.
pub fn compare_runs_with_plots(
    dirs: &[PathBuf],
    baseline: usize,
    plots_dir: Option<&Path>,
) -> Result<(MetricsReport, Vec<PathBuf>), ScenarioError> {
    if dirs.len() < 2 {
        return Err(ScenarioError::Config {
            message: "compare needs at least two runs".into(),
        });
    }
    if baseline >= dirs.len() {
        return Err(ScenarioError::Config {
            message: format!("baseline index {baseline} out of range"),
        });
    }
    let runs = dirs
        .iter()
        .map(|d| load_run(d))
        .collect::<Result<Vec<_>, _>>()?;
    let first = &runs[0].metrics;
    for run in &runs[1..] {
        let m = &run.metrics;
        if m.samples != first.samples || m.start != first.start || m.end != first.end {
            return Err(ScenarioError::Config {
                message: format!(
                    "horizon mismatch: {} has {} samples over {}..{}, {} has {} over {}..{}",
                    first.label(),
                    first.samples,
                    ts(first.start),
                    ts(first.end),
                    m.label(),
                    m.samples,
                    ts(m.start),
                    ts(m.end),
                ),
            });
        }
    }
    let inputs: Vec<(RunSummary, Vec<SeriesSample>)> = runs
        .iter()
        .map(|r| (r.metrics.summary(), r.pf.clone()))
        .collect();
    let report = comparison_report(&inputs, baseline, &CvrFactors::FIELD_TRIAL_FEEDER)?;

    let mut plots = Vec::new();
    if let Some(dir) = plots_dir {
        std::fs::create_dir_all(dir).map_err(|e| ScenarioError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        for (i, run) in runs.iter().enumerate() {
            if i == baseline {
                continue;
            }
            let series = crate::metrics::loss_ratio_series(&runs[baseline].pf, &run.pf)?;
            let path = dir.join(format!("loss_ratio-{i}.csv"));
            let mut body = String::from("timestamp,value\n");
            for s in &series {
                body.push_str(&format!("{},{:.6}\n", ts(s.timestamp), s.value));
            }
            std::fs::write(&path, body).map_err(|e| ScenarioError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            plots.push(path);
        }
    }
    Ok((report, plots))
}
