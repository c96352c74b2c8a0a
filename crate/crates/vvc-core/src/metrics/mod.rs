//! Evaluation metrics: voltage deviation statistics against a reference,
//! transmission Joule-loss ratios from power factor profiles, conservation
//! voltage reduction arithmetic, and the comparison report that ties a set of
//! runs together.
//!
//! All operations are pure functions over immutable series.

mod report;

pub use report::{
    comparison_report, render_text, ComparisonPair, CvrBlock, MetricsReport, RunSummary,
};

use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("series is empty")]
    EmptySeries,
    #[error("{path}: {message}")]
    SeriesIo { path: String, message: String },
    #[error("series timestamps must be strictly increasing (row {row})")]
    NonMonotonicSeries { row: usize },
    #[error("series are not aligned: {reason}")]
    MisalignedSeries { reason: String },
    #[error("power factor magnitude {value} outside (0, 1]")]
    BadPowerFactor { value: f64 },
    #[error("voltage reduction must be {requirement}, got {value}")]
    BadVoltageReduction { requirement: &'static str, value: f64 },
}

/// One timestamped value; the unit is whatever the series is labeled with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub timestamp: DateTime<Utc>,
    pub value: f64,
}

/// Load a `timestamp,value` CSV (the plot-ready profile format) and check
/// the strictly-increasing timestamp invariant.
pub fn load_series_csv(path: &Path) -> Result<Vec<SeriesSample>, MetricsError> {
    let asio = |message: String| MetricsError::SeriesIo {
        path: path.display().to_string(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| asio(e.to_string()))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut series = Vec::new();
    for (i, row) in reader.deserialize::<SeriesSample>().enumerate() {
        series.push(row.map_err(|e| asio(format!("row {}: {e}", i + 2)))?);
    }
    check_series(&series)?;
    Ok(series)
}

/// Checks the strictly-increasing timestamp invariant.
pub fn check_series(series: &[SeriesSample]) -> Result<(), MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    for (i, pair) in series.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(MetricsError::NonMonotonicSeries { row: i + 2 });
        }
    }
    Ok(())
}

/// Mean voltage and the maximum / mean absolute deviation from a reference.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VoltageStats {
    pub mean_kv: f64,
    pub max_deviation_kv: f64,
    pub mean_deviation_kv: f64,
    pub reference_kv: f64,
}

/// `mean(U)`, `max |U_i - ref|` and `mean |U_i - ref|` over the series.
pub fn voltage_stats(series: &[SeriesSample], reference_kv: f64) -> Result<VoltageStats, MetricsError> {
    check_series(series)?;
    let n = series.len() as f64;
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut max_dev = 0.0f64;
    for s in series {
        sum += s.value;
        let dev = (s.value - reference_kv).abs();
        abs_sum += dev;
        max_dev = max_dev.max(dev);
    }
    Ok(VoltageStats {
        mean_kv: sum / n,
        max_deviation_kv: max_dev,
        mean_deviation_kv: abs_sum / n,
        reference_kv,
    })
}

/// Joule-loss ratio of regime `b` relative to regime `a` at equal active
/// power: `(pf_a / pf_b)^2` on magnitudes.
pub fn loss_ratio(pf_a: f64, pf_b: f64) -> Result<f64, MetricsError> {
    let a = pf_a.abs();
    let b = pf_b.abs();
    for value in [a, b] {
        if !(value > 0.0 && value <= 1.0 + 1e-9) {
            return Err(MetricsError::BadPowerFactor { value });
        }
    }
    Ok((a / b) * (a / b))
}

/// Percentage reduction implied by a loss ratio: `(1 - ratio) * 100`.
pub fn loss_reduction_percent(ratio: f64) -> f64 {
    (1.0 - ratio) * 100.0
}

/// Per-sample loss-ratio profile over two aligned pf series.
pub fn loss_ratio_series(
    pf_a: &[SeriesSample],
    pf_b: &[SeriesSample],
) -> Result<Vec<SeriesSample>, MetricsError> {
    check_series(pf_a)?;
    check_series(pf_b)?;
    if pf_a.len() != pf_b.len() {
        return Err(MetricsError::MisalignedSeries {
            reason: format!("lengths differ ({} vs {})", pf_a.len(), pf_b.len()),
        });
    }
    let mut out = Vec::with_capacity(pf_a.len());
    for (i, (a, b)) in pf_a.iter().zip(pf_b).enumerate() {
        if a.timestamp != b.timestamp {
            return Err(MetricsError::MisalignedSeries {
                reason: format!("timestamps differ at row {}", i + 1),
            });
        }
        out.push(SeriesSample {
            timestamp: a.timestamp,
            value: loss_ratio(a.value, b.value)?,
        });
    }
    Ok(out)
}

/// Mean of the per-sample squared pf ratios over two aligned series.
pub fn average_loss_ratio(
    pf_a: &[SeriesSample],
    pf_b: &[SeriesSample],
) -> Result<f64, MetricsError> {
    let series = loss_ratio_series(pf_a, pf_b)?;
    Ok(series.iter().map(|s| s.value).sum::<f64>() / series.len() as f64)
}

/// Conservation voltage reduction factors: percent demand reduction per
/// percent voltage reduction, by quantity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CvrFactors {
    pub kwh: f64,
    pub kw: f64,
    pub kvar: f64,
    /// Per-customer-class kWh factors, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<CvrClassFactors>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CvrClassFactors {
    pub domestic_kwh: f64,
    pub commercial_kwh: f64,
    pub industrial_kwh: f64,
}

impl CvrFactors {
    /// Mean feeder values from the nine-circuit voltage-reduction field
    /// trials this toolkit reports against.
    pub const FIELD_TRIAL_FEEDER: Self = Self {
        kwh: 0.69,
        kw: 0.78,
        kvar: 3.45,
        per_class: Some(CvrClassFactors {
            domestic_kwh: 0.76,
            commercial_kwh: 0.99,
            industrial_kwh: 0.41,
        }),
    };
}

/// Expected percentage savings for a given percent voltage reduction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CvrSavings {
    pub kwh_percent: f64,
    pub kw_percent: f64,
    pub kvar_percent: f64,
}

/// `saving% = CVR_f * deltaV%` for each quantity.
pub fn cvr_savings(delta_v_percent: f64, factors: &CvrFactors) -> Result<CvrSavings, MetricsError> {
    if delta_v_percent < 0.0 {
        return Err(MetricsError::BadVoltageReduction {
            requirement: "non-negative",
            value: delta_v_percent,
        });
    }
    Ok(CvrSavings {
        kwh_percent: factors.kwh * delta_v_percent,
        kw_percent: factors.kw * delta_v_percent,
        kvar_percent: factors.kvar * delta_v_percent,
    })
}

/// `CVR_f = deltaE% / deltaV%`.
pub fn cvr_factor(delta_e_percent: f64, delta_v_percent: f64) -> Result<f64, MetricsError> {
    if delta_v_percent <= 0.0 {
        return Err(MetricsError::BadVoltageReduction {
            requirement: "strictly positive",
            value: delta_v_percent,
        });
    }
    Ok(delta_e_percent / delta_v_percent)
}

#[cfg(test)]
mod tests;
