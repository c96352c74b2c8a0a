//! Discrete-time substation plant: OLTC transformer fed from an exogenous HV
//! bus, a single-breaker shunt capacitor bank, voltage-dependent load classes
//! and the quantized telemetry view SCADA exposes every refresh period.

mod profile;

pub use profile::{HvProfile, LoadProfile, ProfileError};

use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{CapacitorOrder, ControlAction};

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("tap {tap} outside range [{min}, {max}]")]
    TapOutOfRange { tap: i32, min: i32, max: i32 },
    #[error("per-unit voltage {v_pu:.3} outside the load model guard range [0.5, 1.5]")]
    VoltageOutOfGuardRange { v_pu: f64 },
    #[error("invalid action: {reason}")]
    InvalidAction { reason: String },
    #[error("voltage/load fixed point did not converge within {iterations} iterations")]
    NonConvergence { iterations: u32 },
    #[error("power factor undefined for P = Q = 0")]
    UndefinedPowerFactor,
}

/// Static description of the substation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub rated_mva: f64,
    pub hv_nominal_kv: f64,
    pub secondary_nominal_kv: f64,
    /// Operator setpoint for the secondary bus, used for reporting.
    pub desired_kv: f64,
    pub low_limit_kv: f64,
    pub high_limit_kv: f64,
    pub tap_min: i32,
    pub tap_max: i32,
    /// Per-tap ratio step as a fraction of the nominal ratio.
    pub tap_step: f64,
    /// Bank rating at nominal secondary voltage; the bank is modelled as
    /// constant impedance, so the injected Q scales with voltage squared.
    pub capacitor_mvar: f64,
    /// Series impedance of the HV source, per unit on `rated_mva`.
    pub source_r_pu: f64,
    pub source_x_pu: f64,
    /// Multiplies the ideal no-load secondary voltage; 1.0 means the nominal
    /// ratio reproduces the nominal secondary exactly.
    pub no_load_factor: f64,
    /// Constant reactive loss attributed to the transformer, added to the
    /// reported HV-side Q.
    pub transformer_q_loss_mvar: f64,
    /// Voltage at which the load profile's nominal demands are quoted.
    pub load_reference_kv: f64,
    /// Mean cycle length of the constant-energy device population at nominal
    /// voltage; pending energy drains with this time constant.
    pub ce_cycle_minutes: f64,
    pub step_seconds: f64,
    /// Zero-mean uniform dither applied to the exact voltage before
    /// quantization, in volts. Off (0) by default so runs are deterministic
    /// without a seed.
    pub noise_volts: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            rated_mva: 50.0,
            hv_nominal_kv: 66.0,
            secondary_nominal_kv: 20.0,
            desired_kv: 21.0,
            low_limit_kv: 20.3,
            high_limit_kv: 21.6,
            tap_min: -6,
            tap_max: 15,
            tap_step: 0.0146,
            capacitor_mvar: 4.2,
            source_r_pu: 0.01,
            source_x_pu: 0.10,
            no_load_factor: 1.0,
            transformer_q_loss_mvar: 0.0,
            load_reference_kv: 21.0,
            ce_cycle_minutes: 30.0,
            step_seconds: 4.0,
            noise_volts: 0.0,
        }
    }
}

impl PlantConfig {
    pub fn check_tap(&self, tap: i32) -> Result<(), PlantError> {
        if tap < self.tap_min || tap > self.tap_max {
            Err(PlantError::TapOutOfRange {
                tap,
                min: self.tap_min,
                max: self.tap_max,
            })
        } else {
            Ok(())
        }
    }

    /// Reactive power the bank injects at secondary voltage `v2_kv` when the
    /// breaker is closed.
    pub fn capacitor_q(&self, v2_kv: f64) -> f64 {
        let v_pu = v2_kv / self.secondary_nominal_kv;
        self.capacitor_mvar * v_pu * v_pu
    }
}

/// Per-class demand at the load reference voltage for one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadProfilePoint {
    pub pz_mw: f64,
    pub pz_mvar: f64,
    pub pi_mw: f64,
    pub pi_mvar: f64,
    pub pp_mw: f64,
    pub pp_mvar: f64,
    /// Energy scheduled to arrive at the constant-energy class this step.
    pub pe_kwh: f64,
}

impl LoadProfilePoint {
    fn lerp(a: &Self, b: &Self, t: f64) -> Self {
        let mix = |x: f64, y: f64| x + (y - x) * t;
        Self {
            pz_mw: mix(a.pz_mw, b.pz_mw),
            pz_mvar: mix(a.pz_mvar, b.pz_mvar),
            pi_mw: mix(a.pi_mw, b.pi_mw),
            pi_mvar: mix(a.pi_mvar, b.pi_mvar),
            pp_mw: mix(a.pp_mw, b.pp_mw),
            pp_mvar: mix(a.pp_mvar, b.pp_mvar),
            pe_kwh: mix(a.pe_kwh, b.pe_kwh),
        }
    }
}

/// Power drawn by the aggregate load at a given voltage.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadDraw {
    pub p_mw: f64,
    pub q_mvar: f64,
    /// Power drawn by the constant-energy class alone (included in `p_mw`).
    pub ce_p_mw: f64,
    /// Energy actually delivered to the constant-energy class this step.
    pub ce_delivered_kwh: f64,
    /// Change of the constant-energy backlog (inflow minus delivered).
    pub backlog_delta_kwh: f64,
}

/// ZIP plus constant-energy load model.
///
/// Constant-impedance scales with v², constant-current with v, constant-power
/// not at all. The constant-energy class models thermostatic loads: pending
/// devices draw resistively (v² scaling) at a rate proportional to the
/// pending energy, so undervoltage defers delivery into a backlog instead of
/// shedding it.
pub fn load_power(
    point: &LoadProfilePoint,
    v_pu: f64,
    backlog_kwh: f64,
    cfg: &PlantConfig,
) -> Result<LoadDraw, PlantError> {
    if !(0.5..=1.5).contains(&v_pu) {
        return Err(PlantError::VoltageOutOfGuardRange { v_pu });
    }
    let p_zip = point.pz_mw * v_pu * v_pu + point.pi_mw * v_pu + point.pp_mw;
    let q_zip = point.pz_mvar * v_pu * v_pu + point.pi_mvar * v_pu + point.pp_mvar;

    let step_h = cfg.step_seconds / 3600.0;
    let cycle_h = cfg.ce_cycle_minutes / 60.0;
    let pending_kwh = backlog_kwh + point.pe_kwh;
    let want_kwh = pending_kwh * (step_h / cycle_h) * v_pu * v_pu;
    let delivered_kwh = want_kwh.min(pending_kwh);
    let ce_p_mw = delivered_kwh / step_h / 1000.0;

    Ok(LoadDraw {
        p_mw: p_zip + ce_p_mw,
        q_mvar: q_zip,
        ce_p_mw,
        ce_delivered_kwh: delivered_kwh,
        backlog_delta_kwh: point.pe_kwh - delivered_kwh,
    })
}

/// Secondary bus voltage for a given tap and HV-side loading.
///
/// `v2 = hv / (ratio0 * (1 - tap_step * tap)) * no_load_factor - drop`, with
/// a linear `drop = (r_pu * P + x_pu * Q) / S_rated * V_nominal`. Raising the
/// tap index raises the secondary by one ratio step.
pub fn secondary_voltage(
    cfg: &PlantConfig,
    hv_kv: f64,
    tap: i32,
    p_mw: f64,
    q_mvar: f64,
) -> Result<f64, PlantError> {
    cfg.check_tap(tap)?;
    let ratio0 = cfg.hv_nominal_kv / cfg.secondary_nominal_kv;
    let ratio = ratio0 * (1.0 - cfg.tap_step * tap as f64);
    let ideal = hv_kv / ratio * cfg.no_load_factor;
    let drop =
        (cfg.source_r_pu * p_mw + cfg.source_x_pu * q_mvar) / cfg.rated_mva * cfg.secondary_nominal_kv;
    Ok(ideal - drop)
}

/// Round half away from zero, the SCADA convention used for all telemetry.
pub fn round_half_away_from_zero(x: f64) -> f64 {
    x.signum() * (x.abs() + 0.5).floor()
}

/// Quantize to an integer multiple of `resolution`.
pub fn quantize(value: f64, resolution: f64) -> f64 {
    round_half_away_from_zero(value / resolution) * resolution
}

/// Signed power factor: magnitude `P / sqrt(P² + Q²)`, negative when the
/// current leads the voltage (capacitive, Q < 0 under the consumer
/// convention).
pub fn power_factor(p_mw: f64, q_mvar: f64) -> Result<f64, PlantError> {
    if p_mw == 0.0 && q_mvar == 0.0 {
        return Err(PlantError::UndefinedPowerFactor);
    }
    let magnitude = p_mw.abs() / (p_mw * p_mw + q_mvar * q_mvar).sqrt();
    Ok(if q_mvar < 0.0 { -magnitude } else { magnitude })
}

/// Ground-truth state advanced by [`step`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantState {
    pub tap: i32,
    pub breaker_closed: bool,
    pub hv_kv: f64,
    pub secondary_kv: f64,
    pub ce_backlog_kwh: f64,
    pub tap_operations: u64,
    pub breaker_operations: u64,
    /// Tap moves still owed from a multi-step order; the mechanism moves at
    /// most one position per simulation step.
    pub pending_tap: i32,
    pub clock: DateTime<Utc>,
}

impl PlantState {
    pub fn new(tap: i32, breaker_closed: bool, clock: DateTime<Utc>) -> Self {
        Self {
            tap,
            breaker_closed,
            hv_kv: 0.0,
            secondary_kv: 0.0,
            ce_backlog_kwh: 0.0,
            tap_operations: 0,
            breaker_operations: 0,
            pending_tap: 0,
            clock,
        }
    }
}

/// What the SCADA refresh delivers: voltage to 100 V, P to 10 kW, Q to
/// 10 kVAr, exact tap and breaker state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub timestamp: DateTime<Utc>,
    pub voltage_kv: f64,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub tap: i32,
    pub breaker_closed: bool,
    /// Derived from the quantized P and Q; `None` when both are zero.
    pub power_factor: Option<f64>,
}

/// Exact (pre-quantization) solution of one step, for analysis.
#[derive(Debug, Clone, Copy)]
pub struct StepDetail {
    pub exact_voltage_kv: f64,
    pub p_hv_mw: f64,
    pub q_hv_mvar: f64,
    pub capacitor_q_mvar: f64,
    pub load: LoadDraw,
    pub iterations: u32,
}

const FIXED_POINT_TOL_PU: f64 = 1e-6;
const FIXED_POINT_MAX_ITER: u32 = 50;
const FIXED_POINT_DAMPING: f64 = 0.7;

/// Advance the plant by one step: apply the action, solve the voltage/load
/// algebraic loop by damped fixed-point iteration, update the constant-energy
/// backlog and emit quantized telemetry stamped with the pre-step clock.
pub fn step<R: Rng + ?Sized>(
    state: &PlantState,
    action: &ControlAction,
    point: &LoadProfilePoint,
    hv_kv: f64,
    cfg: &PlantConfig,
    rng: &mut R,
) -> Result<(PlantState, TelemetrySample, StepDetail), PlantError> {
    let mut next = state.clone();
    next.hv_kv = hv_kv;

    // capacitor order first; redundant orders are controller bugs here
    match action.capacitor {
        CapacitorOrder::Connect => {
            if next.breaker_closed {
                return Err(PlantError::InvalidAction {
                    reason: "connect ordered while the breaker is already closed".into(),
                });
            }
            next.breaker_closed = true;
            next.breaker_operations += 1;
        }
        CapacitorOrder::Disconnect => {
            if !next.breaker_closed {
                return Err(PlantError::InvalidAction {
                    reason: "disconnect ordered while the breaker is already open".into(),
                });
            }
            next.breaker_closed = false;
            next.breaker_operations += 1;
        }
        CapacitorOrder::Hold => {}
    }

    // a fresh tap order replaces whatever was still pending
    if action.tap_delta != 0 {
        next.pending_tap = action.tap_delta;
    }
    if next.pending_tap != 0 {
        let dir = next.pending_tap.signum();
        let target = (next.tap + dir).clamp(cfg.tap_min, cfg.tap_max);
        if target != next.tap {
            next.tap = target;
            next.tap_operations += 1;
            next.pending_tap -= dir;
        } else {
            // end stop reached; drop the remainder of the order
            next.pending_tap = 0;
        }
    }

    // solve v2 <-> load demand
    let mut v2 = if state.secondary_kv > 0.0 {
        state.secondary_kv
    } else {
        cfg.load_reference_kv
    };
    let tol_kv = FIXED_POINT_TOL_PU * cfg.secondary_nominal_kv;
    let mut iterations = 0;
    let mut solved = false;
    let mut draw = LoadDraw::default();
    let mut q_cap = 0.0;
    let mut p_hv = 0.0;
    let mut q_hv = 0.0;
    while iterations < FIXED_POINT_MAX_ITER {
        iterations += 1;
        let v_pu = v2 / cfg.load_reference_kv;
        draw = load_power(point, v_pu, state.ce_backlog_kwh, cfg)?;
        q_cap = if next.breaker_closed {
            cfg.capacitor_q(v2)
        } else {
            0.0
        };
        p_hv = draw.p_mw;
        q_hv = draw.q_mvar - q_cap + cfg.transformer_q_loss_mvar;
        let v2_new = secondary_voltage(cfg, hv_kv, next.tap, p_hv, q_hv)?;
        if (v2_new - v2).abs() < tol_kv {
            // draw, q_cap and the HV flows were all computed at this v2
            solved = true;
            break;
        }
        v2 += (v2_new - v2) * FIXED_POINT_DAMPING;
    }
    if !solved {
        return Err(PlantError::NonConvergence {
            iterations: FIXED_POINT_MAX_ITER,
        });
    }

    next.secondary_kv = v2;
    next.ce_backlog_kwh = (state.ce_backlog_kwh + draw.backlog_delta_kwh).max(0.0);

    let noisy_v2 = if cfg.noise_volts > 0.0 {
        v2 + rng.gen_range(-cfg.noise_volts..=cfg.noise_volts) / 1000.0
    } else {
        v2
    };
    let p_q = quantize(p_hv, 0.01); // 10 kW
    let q_q = quantize(q_hv, 0.01); // 10 kVAr
    let sample = TelemetrySample {
        timestamp: state.clock,
        voltage_kv: quantize(noisy_v2, 0.1), // 100 V
        p_mw: p_q,
        q_mvar: q_q,
        tap: next.tap,
        breaker_closed: next.breaker_closed,
        power_factor: power_factor(p_q, q_q).ok(),
    };
    let detail = StepDetail {
        exact_voltage_kv: v2,
        p_hv_mw: p_hv,
        q_hv_mvar: q_hv,
        capacitor_q_mvar: q_cap,
        load: draw,
        iterations,
    };
    next.clock = state.clock + Duration::milliseconds((cfg.step_seconds * 1000.0) as i64);
    Ok((next, sample, detail))
}
