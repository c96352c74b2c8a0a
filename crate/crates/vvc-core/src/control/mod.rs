//! Closed-loop decision layer: the fuzzy controller plus two baselines (a
//! deadband AVR and a latency-limited one-step-lookahead optimizer).
//!
//! Controllers are single-owner state machines fed one telemetry sample per
//! refresh; separate scenario runs use separate instances.

mod opf;

pub use opf::{CandidateEval, OpfParams, OpfProxyController};

use std::sync::Arc;

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fis::{FisError, RuleBase, Unit};
use crate::plant::TelemetrySample;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Fis(#[from] FisError),
    #[error("controller/rulebase binding: {message}")]
    Binding { message: String },
    #[error("invalid schedule window '{window}': {message}")]
    Schedule { window: String, message: String },
}

/// Discrete order for one step: a tap move of up to two positions and/or a
/// capacitor switching order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlAction {
    pub tap_delta: i32,
    pub capacitor: CapacitorOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacitorOrder {
    Connect,
    Disconnect,
    Hold,
}

impl ControlAction {
    pub const HOLD: Self = Self {
        tap_delta: 0,
        capacitor: CapacitorOrder::Hold,
    };

    pub fn is_noop(&self) -> bool {
        self.tap_delta == 0 && self.capacitor == CapacitorOrder::Hold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Oltc,
    Capacitor,
}

/// Timestamped controller activity, append-only.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ControllerEvent {
    Decision {
        timestamp: DateTime<Utc>,
        action: ControlAction,
        /// Raw crisp inference outputs, when the controller has them.
        #[serde(skip_serializing_if = "Option::is_none")]
        raw: Option<RawOutputs>,
    },
    Degraded {
        timestamp: DateTime<Utc>,
        reason: String,
        requested: ControlAction,
        issued: ControlAction,
    },
    BudgetExhausted {
        timestamp: DateTime<Utc>,
        device: Device,
    },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RawOutputs {
    pub taps: f64,
    pub capacitor: f64,
}

/// Daily switching allowances; counters reset at midnight of the sample
/// clock. Exhausted devices degrade further orders to hold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwitchingBudget {
    pub max_tap_ops_per_day: u32,
    pub max_cap_ops_per_day: u32,
    #[serde(skip)]
    tap_ops_today: u32,
    #[serde(skip)]
    cap_ops_today: u32,
    #[serde(skip)]
    day: Option<NaiveDate>,
}

impl SwitchingBudget {
    pub fn new(max_tap_ops_per_day: u32, max_cap_ops_per_day: u32) -> Self {
        Self {
            max_tap_ops_per_day,
            max_cap_ops_per_day,
            tap_ops_today: 0,
            cap_ops_today: 0,
            day: None,
        }
    }

    pub fn tap_ops_today(&self) -> u32 {
        self.tap_ops_today
    }

    pub fn cap_ops_today(&self) -> u32 {
        self.cap_ops_today
    }

    fn roll(&mut self, t: DateTime<Utc>) {
        let date = t.date_naive();
        if self.day != Some(date) {
            self.day = Some(date);
            self.tap_ops_today = 0;
            self.cap_ops_today = 0;
        }
    }

    /// Clamp an action to the remaining daily allowance, recording what was
    /// degraded. Applied last, after every other shaping of the action.
    pub fn admit(
        &mut self,
        t: DateTime<Utc>,
        requested: ControlAction,
        events: &mut Vec<ControllerEvent>,
    ) -> ControlAction {
        self.roll(t);
        let mut action = requested;

        if action.tap_delta != 0 {
            let remaining = self.max_tap_ops_per_day.saturating_sub(self.tap_ops_today);
            let wanted = action.tap_delta.unsigned_abs();
            if remaining == 0 {
                events.push(ControllerEvent::BudgetExhausted {
                    timestamp: t,
                    device: Device::Oltc,
                });
                action.tap_delta = 0;
            } else if wanted > remaining {
                let issued = ControlAction {
                    tap_delta: action.tap_delta.signum() * remaining as i32,
                    capacitor: action.capacitor,
                };
                events.push(ControllerEvent::Degraded {
                    timestamp: t,
                    reason: "tap order clamped to remaining daily budget".into(),
                    requested,
                    issued,
                });
                action.tap_delta = issued.tap_delta;
                self.tap_ops_today += remaining;
            } else {
                self.tap_ops_today += wanted;
            }
        }

        if action.capacitor != CapacitorOrder::Hold {
            if self.cap_ops_today >= self.max_cap_ops_per_day {
                events.push(ControllerEvent::BudgetExhausted {
                    timestamp: t,
                    device: Device::Capacitor,
                });
                action.capacitor = CapacitorOrder::Hold;
            } else {
                self.cap_ops_today += 1;
            }
        }
        action
    }
}

/// Daily on-peak windows (`HH:MM-HH:MM`, may wrap midnight).
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    windows: Vec<(NaiveTime, NaiveTime)>,
}

impl Schedule {
    pub fn from_windows(windows: &[String]) -> Result<Self, ControlError> {
        let mut parsed = Vec::with_capacity(windows.len());
        for w in windows {
            let bad = |message: &str| ControlError::Schedule {
                window: w.clone(),
                message: message.into(),
            };
            let (start, end) = w.split_once('-').ok_or_else(|| bad("expected HH:MM-HH:MM"))?;
            let start = NaiveTime::parse_from_str(start.trim(), "%H:%M")
                .map_err(|e| bad(&e.to_string()))?;
            let end =
                NaiveTime::parse_from_str(end.trim(), "%H:%M").map_err(|e| bad(&e.to_string()))?;
            parsed.push((start, end));
        }
        Ok(Self { windows: parsed })
    }

    pub fn is_on_peak(&self, t: DateTime<Utc>) -> bool {
        let time = t.time();
        self.windows.iter().any(|&(start, end)| {
            if start <= end {
                time >= start && time < end
            } else {
                time >= start || time < end
            }
        })
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// A closed-loop decision maker fed one telemetry sample per refresh.
pub trait Controller {
    fn decide(&mut self, sample: &TelemetrySample) -> Result<ControlAction, ControlError>;

    /// Drains events accumulated since the last call.
    fn take_events(&mut self) -> Vec<ControllerEvent>;

    fn name(&self) -> &'static str;

    /// (tap operations, capacitor operations) ordered so far, as counted by
    /// the controller's own budget machinery, when it has one.
    fn ops_issued(&self) -> Option<(u32, u32)> {
        None
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FisParams {
    pub oltc_budget: u32,
    pub cap_budget: u32,
    /// Samples to hold the tap channel after a tap action (anti-hunting).
    pub settle_steps: u32,
}

impl Default for FisParams {
    fn default() -> Self {
        Self {
            oltc_budget: 30,
            cap_budget: 6,
            settle_steps: 3,
        }
    }
}

/// Telemetry channels bound to rulebase inputs by declared unit, so the
/// configuration may name variables freely.
struct InputBinding {
    voltage: String,
    reactive: String,
    tap: String,
    shunt: String,
    period: Option<String>,
}

/// The fuzzy controller: quantized telemetry in, inference, discretization,
/// anti-hunting, redundancy shaping and budget enforcement out.
pub struct FisController {
    rulebase: Arc<RuleBase>,
    schedule: Schedule,
    budget: SwitchingBudget,
    settle_steps: u32,
    settle_remaining: u32,
    binding: InputBinding,
    taps_output: String,
    capacitor_output: String,
    events: Vec<ControllerEvent>,
}

impl FisController {
    pub fn new(
        rulebase: Arc<RuleBase>,
        schedule: Schedule,
        params: &FisParams,
    ) -> Result<Self, ControlError> {
        let unique_input = |unit: Unit| -> Result<Option<String>, ControlError> {
            let mut found = None;
            for var in rulebase.inputs() {
                if var.unit() == unit {
                    if found.is_some() {
                        return Err(ControlError::Binding {
                            message: format!("more than one input variable with unit {unit}"),
                        });
                    }
                    found = Some(var.name().to_string());
                }
            }
            Ok(found)
        };
        let require = |name: Option<String>, unit: Unit| {
            name.ok_or_else(|| ControlError::Binding {
                message: format!("rulebase declares no input with unit {unit}"),
            })
        };
        let binding = InputBinding {
            voltage: require(unique_input(Unit::Kilovolt)?, Unit::Kilovolt)?,
            reactive: require(unique_input(Unit::Megavar)?, Unit::Megavar)?,
            tap: require(unique_input(Unit::TapIndex)?, Unit::TapIndex)?,
            shunt: require(unique_input(Unit::Status)?, Unit::Status)?,
            period: unique_input(Unit::Period)?,
        };
        if binding.period.is_none() && !schedule.is_empty() {
            return Err(ControlError::Binding {
                message: "an on-peak schedule is configured but the rulebase has no period input"
                    .into(),
            });
        }

        let mut taps_output = None;
        let mut capacitor_output = None;
        for var in rulebase.outputs() {
            match var.unit() {
                Unit::TapIndex => taps_output = Some(var.name().to_string()),
                Unit::Status => capacitor_output = Some(var.name().to_string()),
                _ => {}
            }
        }
        let taps_output = taps_output.ok_or_else(|| ControlError::Binding {
            message: "rulebase declares no tap output".into(),
        })?;
        let capacitor_output = capacitor_output.ok_or_else(|| ControlError::Binding {
            message: "rulebase declares no capacitor output".into(),
        })?;

        Ok(Self {
            rulebase,
            schedule,
            budget: SwitchingBudget::new(params.oltc_budget, params.cap_budget),
            settle_steps: params.settle_steps,
            settle_remaining: 0,
            binding,
            taps_output,
            capacitor_output,
            events: Vec::new(),
        })
    }

    pub fn budget(&self) -> &SwitchingBudget {
        &self.budget
    }

    fn crisp_inputs(&self, sample: &TelemetrySample) -> IndexMap<String, f64> {
        let mut inputs = IndexMap::with_capacity(5);
        inputs.insert(self.binding.voltage.clone(), sample.voltage_kv);
        inputs.insert(self.binding.reactive.clone(), sample.q_mvar);
        inputs.insert(self.binding.tap.clone(), sample.tap as f64);
        inputs.insert(
            self.binding.shunt.clone(),
            if sample.breaker_closed { 1.0 } else { 0.0 },
        );
        if let Some(period) = &self.binding.period {
            inputs.insert(
                period.clone(),
                if self.schedule.is_on_peak(sample.timestamp) {
                    1.0
                } else {
                    0.0
                },
            );
        }
        inputs
    }
}

impl Controller for FisController {
    fn decide(&mut self, sample: &TelemetrySample) -> Result<ControlAction, ControlError> {
        let t = sample.timestamp;
        let trace = self.rulebase.infer_trace(&self.crisp_inputs(sample))?;
        let taps_raw = trace.outputs[&self.taps_output];
        let cap_raw = trace.outputs[&self.capacitor_output];

        // discretize: +-0.5 no-action deadbands on both channels
        let mut tap_delta = if taps_raw.abs() <= 0.5 {
            0
        } else {
            (taps_raw.round() as i32).clamp(-2, 2)
        };
        let mut capacitor = if cap_raw > 0.5 {
            CapacitorOrder::Connect
        } else if cap_raw < -0.5 {
            CapacitorOrder::Disconnect
        } else {
            CapacitorOrder::Hold
        };
        let wanted = ControlAction {
            tap_delta,
            capacitor,
        };

        if self.settle_remaining > 0 {
            if tap_delta != 0 {
                self.events.push(ControllerEvent::Degraded {
                    timestamp: t,
                    reason: "tap held during post-action settle time".into(),
                    requested: wanted,
                    issued: ControlAction {
                        tap_delta: 0,
                        capacitor,
                    },
                });
            }
            tap_delta = 0;
            self.settle_remaining -= 1;
        }

        // orders redundant with the breaker state degrade to hold
        let redundant = matches!(
            (capacitor, sample.breaker_closed),
            (CapacitorOrder::Connect, true) | (CapacitorOrder::Disconnect, false)
        );
        if redundant {
            capacitor = CapacitorOrder::Hold;
        }

        let action = self.budget.admit(
            t,
            ControlAction {
                tap_delta,
                capacitor,
            },
            &mut self.events,
        );
        if action.tap_delta != 0 {
            self.settle_remaining = self.settle_steps;
        }
        self.events.push(ControllerEvent::Decision {
            timestamp: t,
            action,
            raw: Some(RawOutputs {
                taps: taps_raw,
                capacitor: cap_raw,
            }),
        });
        Ok(action)
    }

    fn take_events(&mut self) -> Vec<ControllerEvent> {
        std::mem::take(&mut self.events)
    }

    fn name(&self) -> &'static str {
        "fis"
    }

    fn ops_issued(&self) -> Option<(u32, u32)> {
        Some((self.budget.tap_ops_today(), self.budget.cap_ops_today()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DeadbandParams {
    pub reference_kv: f64,
    pub deadband_kv: f64,
    /// Consecutive out-of-band samples required before a tap order.
    pub samples_to_act: u32,
}

impl Default for DeadbandParams {
    fn default() -> Self {
        Self {
            reference_kv: 21.0,
            deadband_kv: 0.3,
            samples_to_act: 3,
        }
    }
}

/// Conventional AVR: taps after K consecutive samples outside the deadband,
/// never touches the capacitor.
pub struct DeadbandController {
    params: DeadbandParams,
    below: u32,
    above: u32,
    events: Vec<ControllerEvent>,
}

impl DeadbandController {
    pub fn new(params: DeadbandParams) -> Self {
        Self {
            params,
            below: 0,
            above: 0,
            events: Vec::new(),
        }
    }
}

impl Controller for DeadbandController {
    fn decide(&mut self, sample: &TelemetrySample) -> Result<ControlAction, ControlError> {
        let v = sample.voltage_kv;
        let low = self.params.reference_kv - self.params.deadband_kv;
        let high = self.params.reference_kv + self.params.deadband_kv;
        self.below = if v < low { self.below + 1 } else { 0 };
        self.above = if v > high { self.above + 1 } else { 0 };

        let mut action = ControlAction::HOLD;
        if self.below >= self.params.samples_to_act {
            action.tap_delta = 1;
            self.below = 0;
        } else if self.above >= self.params.samples_to_act {
            action.tap_delta = -1;
            self.above = 0;
        }
        if !action.is_noop() {
            self.events.push(ControllerEvent::Decision {
                timestamp: sample.timestamp,
                action,
                raw: None,
            });
        }
        Ok(action)
    }

    fn take_events(&mut self) -> Vec<ControllerEvent> {
        std::mem::take(&mut self.events)
    }

    fn name(&self) -> &'static str {
        "deadband"
    }
}

#[cfg(test)]
mod tests;
