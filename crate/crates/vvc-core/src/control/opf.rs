//! Baseline emulating a centralized optimizer: every `period` it enumerates
//! the one-step neighborhood {tap-1, tap, tap+1} x {bank on, off} on an
//! internal constant-PQ model, and acts only when the best candidate improves
//! its objective by more than a threshold. Optionally it refuses to open the
//! capacitor breaker overnight unless a voltage limit is violated, matching
//! the observed habit of such systems of leaving banks connected all night.

use chrono::{DateTime, NaiveTime, Utc};
use serde::{Deserialize, Serialize};

use super::{CapacitorOrder, ControlAction, Controller, ControlError, ControllerEvent};
use crate::plant::{secondary_voltage, PlantConfig, TelemetrySample};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OpfParams {
    /// Acts only every this many telemetry refreshes (centralized latency).
    pub period_steps: u32,
    pub weight_voltage: f64,
    pub weight_reactive: f64,
    /// Minimum objective improvement before any output is acted.
    pub improvement_threshold: f64,
    pub target_kv: f64,
    /// Keep the bank connected during the night window unless a voltage
    /// limit is violated.
    pub overnight_hold: bool,
    pub night_start: NaiveTime,
    pub night_end: NaiveTime,
}

impl Default for OpfParams {
    fn default() -> Self {
        Self {
            period_steps: 225, // 15 min of 4 s refreshes
            weight_voltage: 1.0,
            weight_reactive: 0.05,
            improvement_threshold: 0.005,
            target_kv: 21.0,
            overnight_hold: true,
            night_start: NaiveTime::from_hms_opt(22, 0, 0).unwrap(),
            night_end: NaiveTime::from_hms_opt(9, 0, 0).unwrap(),
        }
    }
}

/// One enumerated candidate with its predicted operating point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CandidateEval {
    pub tap: i32,
    pub breaker_closed: bool,
    pub predicted_v_kv: f64,
    pub predicted_q_mvar: f64,
    pub objective: f64,
}

pub struct OpfProxyController {
    params: OpfParams,
    plant: PlantConfig,
    steps_seen: u64,
    events: Vec<ControllerEvent>,
}

impl OpfProxyController {
    pub fn new(params: OpfParams, plant: PlantConfig) -> Self {
        Self {
            params,
            plant,
            steps_seen: 0,
            events: Vec::new(),
        }
    }

    pub fn params(&self) -> &OpfParams {
        &self.params
    }

    fn in_night_window(&self, t: DateTime<Utc>) -> bool {
        let time = t.time();
        let (s, e) = (self.params.night_start, self.params.night_end);
        if s <= e {
            time >= s && time < e
        } else {
            time >= s || time < e
        }
    }

    /// Back out a constant-PQ load and an equivalent HV voltage from the
    /// sample, then predict the operating point of every candidate.
    pub fn evaluate_candidates(&self, sample: &TelemetrySample) -> Vec<CandidateEval> {
        let cfg = &self.plant;
        let v_meas = sample.voltage_kv;
        let p_load = sample.p_mw;
        let q_cap_now = if sample.breaker_closed {
            cfg.capacitor_q(v_meas)
        } else {
            0.0
        };
        let q_load = sample.q_mvar + q_cap_now - cfg.transformer_q_loss_mvar;

        // HV estimate consistent with the measured point at the current tap
        let ratio0 = cfg.hv_nominal_kv / cfg.secondary_nominal_kv;
        let drop_now = (cfg.source_r_pu * sample.p_mw + cfg.source_x_pu * sample.q_mvar)
            / cfg.rated_mva
            * cfg.secondary_nominal_kv;
        let hv_est = (v_meas + drop_now) * ratio0 * (1.0 - cfg.tap_step * sample.tap as f64)
            / cfg.no_load_factor;

        let mut out = Vec::with_capacity(6);
        for dt in [0, -1, 1] {
            let tap = sample.tap + dt;
            if cfg.check_tap(tap).is_err() {
                continue;
            }
            for closed in [sample.breaker_closed, !sample.breaker_closed] {
                let mut v2 = v_meas;
                let mut q_hv = 0.0;
                for _ in 0..40 {
                    let q_cap = if closed { cfg.capacitor_q(v2) } else { 0.0 };
                    q_hv = q_load - q_cap + cfg.transformer_q_loss_mvar;
                    let v2_new = match secondary_voltage(cfg, hv_est, tap, p_load, q_hv) {
                        Ok(v) => v,
                        Err(_) => break,
                    };
                    if (v2_new - v2).abs() < 1e-6 * cfg.secondary_nominal_kv {
                        break;
                    }
                    v2 += (v2_new - v2) * 0.7;
                }
                let dv = v2 - self.params.target_kv;
                out.push(CandidateEval {
                    tap,
                    breaker_closed: closed,
                    predicted_v_kv: v2,
                    predicted_q_mvar: q_hv,
                    objective: self.params.weight_voltage * dv * dv
                        + self.params.weight_reactive * q_hv * q_hv,
                });
            }
        }
        out
    }
}

impl Controller for OpfProxyController {
    fn decide(&mut self, sample: &TelemetrySample) -> Result<ControlAction, ControlError> {
        let due = self.steps_seen.is_multiple_of(self.params.period_steps as u64);
        self.steps_seen += 1;
        if !due {
            return Ok(ControlAction::HOLD);
        }

        let limits_violated =
            sample.voltage_kv < self.plant.low_limit_kv || sample.voltage_kv > self.plant.high_limit_kv;
        let hold_bank = self.params.overnight_hold
            && sample.breaker_closed
            && self.in_night_window(sample.timestamp)
            && !limits_violated;

        let candidates = self.evaluate_candidates(sample);
        let incumbent = candidates
            .iter()
            .find(|c| c.tap == sample.tap && c.breaker_closed == sample.breaker_closed)
            .copied()
            .ok_or_else(|| ControlError::Binding {
                message: "incumbent state missing from candidate enumeration".into(),
            })?;

        let mut best = incumbent;
        for c in &candidates {
            let barred = hold_bank && !c.breaker_closed;
            if !barred && c.objective < best.objective {
                best = *c;
            }
        }

        let improvement = incumbent.objective - best.objective;
        if improvement <= self.params.improvement_threshold {
            return Ok(ControlAction::HOLD);
        }

        let capacitor = match (sample.breaker_closed, best.breaker_closed) {
            (false, true) => CapacitorOrder::Connect,
            (true, false) => CapacitorOrder::Disconnect,
            _ => CapacitorOrder::Hold,
        };
        let action = ControlAction {
            tap_delta: best.tap - sample.tap,
            capacitor,
        };
        self.events.push(ControllerEvent::Decision {
            timestamp: sample.timestamp,
            action,
            raw: None,
        });
        Ok(action)
    }

    fn take_events(&mut self) -> Vec<ControllerEvent> {
        std::mem::take(&mut self.events)
    }

    fn name(&self) -> &'static str {
        "opf_proxy"
    }
}
