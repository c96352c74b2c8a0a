//! Comparison reports over named runs: per-run summaries plus pairwise loss
//! ratios, deviation improvements and expected CVR savings.

use serde::{Deserialize, Serialize};

use super::{
    average_loss_ratio, cvr_savings, loss_reduction_percent, voltage_stats, CvrFactors,
    CvrSavings, MetricsError, SeriesSample, VoltageStats,
};

/// Everything reported about one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub samples: usize,
    pub voltage: VoltageStats,
    pub p_mean_mw: f64,
    pub q_mean_mvar: f64,
    /// Fraction of samples with pf magnitude at or above the threshold.
    pub pf_at_least_098: f64,
    pub pf_at_least_099: f64,
    pub tap_operations: u64,
    pub capacitor_operations: u64,
}

impl RunSummary {
    /// Summarize aligned telemetry series. `pf` entries are signed; the
    /// exceedance fractions use magnitudes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_series(
        name: impl Into<String>,
        voltage: &[SeriesSample],
        p: &[SeriesSample],
        q: &[SeriesSample],
        pf: &[SeriesSample],
        reference_kv: f64,
        tap_operations: u64,
        capacitor_operations: u64,
    ) -> Result<Self, MetricsError> {
        let stats = voltage_stats(voltage, reference_kv)?;
        let mean = |series: &[SeriesSample]| -> Result<f64, MetricsError> {
            super::check_series(series)?;
            Ok(series.iter().map(|s| s.value).sum::<f64>() / series.len() as f64)
        };
        let share = |threshold: f64| {
            pf.iter().filter(|s| s.value.abs() >= threshold).count() as f64 / pf.len().max(1) as f64
        };
        Ok(Self {
            name: name.into(),
            samples: voltage.len(),
            voltage: stats,
            p_mean_mw: mean(p)?,
            q_mean_mvar: mean(q)?,
            pf_at_least_098: share(0.98),
            pf_at_least_099: share(0.99),
            tap_operations,
            capacitor_operations,
        })
    }
}

/// Pairwise comparison of a run against the baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonPair {
    pub baseline: String,
    pub candidate: String,
    /// Mean over samples of (pf_baseline / pf_candidate)^2.
    pub average_loss_ratio: f64,
    pub loss_reduction_percent: f64,
    /// 100 * (1 - D_m(candidate) / D_m(baseline)).
    pub mean_deviation_reduction_percent: Option<f64>,
    /// 100 * D_m(candidate) / D_m(baseline) — the residual fraction, which
    /// is a different number than the reduction above.
    pub mean_deviation_residual_percent: Option<f64>,
    /// 100 * (U_baseline - U_candidate) / U_baseline.
    pub delta_v_percent: f64,
    /// Expected CVR savings for that voltage reduction; absent when the
    /// candidate actually ran at a higher mean voltage.
    pub cvr: Option<CvrBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvrBlock {
    pub delta_v_percent: f64,
    pub factors: CvrFactors,
    pub savings: CvrSavings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: Vec<RunSummary>,
    pub pairs: Vec<ComparisonPair>,
}

/// Build the report: per-run summaries plus every run compared against the
/// chosen baseline (given per run with its signed pf series).
pub fn comparison_report(
    runs: &[(RunSummary, Vec<SeriesSample>)],
    baseline: usize,
    factors: &CvrFactors,
) -> Result<MetricsReport, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let (base_summary, base_pf) = &runs[baseline];
    let mut pairs = Vec::new();
    for (i, (summary, pf)) in runs.iter().enumerate() {
        if i == baseline {
            continue;
        }
        let ratio = average_loss_ratio(base_pf, pf)?;
        let dm_base = base_summary.voltage.mean_deviation_kv;
        let dm_cand = summary.voltage.mean_deviation_kv;
        let (reduction, residual) = if dm_base > 0.0 {
            (
                Some((1.0 - dm_cand / dm_base) * 100.0),
                Some(dm_cand / dm_base * 100.0),
            )
        } else {
            (None, None)
        };
        let delta_v_percent =
            (base_summary.voltage.mean_kv - summary.voltage.mean_kv) / base_summary.voltage.mean_kv
                * 100.0;
        let cvr = if delta_v_percent >= 0.0 {
            Some(CvrBlock {
                delta_v_percent,
                factors: *factors,
                savings: cvr_savings(delta_v_percent, factors)?,
            })
        } else {
            None
        };
        pairs.push(ComparisonPair {
            baseline: base_summary.name.clone(),
            candidate: summary.name.clone(),
            average_loss_ratio: ratio,
            loss_reduction_percent: loss_reduction_percent(ratio),
            mean_deviation_reduction_percent: reduction,
            mean_deviation_residual_percent: residual,
            delta_v_percent,
            cvr,
        });
    }
    Ok(MetricsReport {
        runs: runs.iter().map(|(s, _)| s.clone()).collect(),
        pairs,
    })
}

/// Human-readable aligned-column rendering. Voltages and ratios carry four
/// decimals, percentages two.
pub fn render_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    let header = format!(
        "{:<24} {:>8} {:>9} {:>8} {:>8} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8}\n",
        "run", "samples", "U_mean", "D_M", "D_m", "P_mean", "Q_mean", "pf>=0.98", "pf>=0.99",
        "tap_ops", "cap_ops"
    );
    out.push_str(&header);
    for run in &report.runs {
        out.push_str(&format!(
            "{:<24} {:>8} {:>9.4} {:>8.4} {:>8.4} {:>9.4} {:>9.4} {:>8.2}% {:>8.2}% {:>8} {:>8}\n",
            run.name,
            run.samples,
            run.voltage.mean_kv,
            run.voltage.max_deviation_kv,
            run.voltage.mean_deviation_kv,
            run.p_mean_mw,
            run.q_mean_mvar,
            run.pf_at_least_098 * 100.0,
            run.pf_at_least_099 * 100.0,
            run.tap_operations,
            run.capacitor_operations,
        ));
    }
    for pair in &report.pairs {
        out.push('\n');
        out.push_str(&format!(
            "{} vs {}: average loss ratio {:.4}, loss reduction {:.2}%\n",
            pair.baseline, pair.candidate, pair.average_loss_ratio, pair.loss_reduction_percent
        ));
        if let (Some(red), Some(res)) = (
            pair.mean_deviation_reduction_percent,
            pair.mean_deviation_residual_percent,
        ) {
            out.push_str(&format!(
                "  mean deviation reduced by {red:.2}% (residual {res:.2}% of baseline)\n"
            ));
        }
        out.push_str(&format!("  mean voltage change {:.2}%\n", pair.delta_v_percent));
        if let Some(cvr) = &pair.cvr {
            out.push_str(&format!(
                "  expected CVR savings at dV {:.2}%: {:.2}% kWh, {:.2}% kW, {:.2}% kVAr\n",
                cvr.delta_v_percent,
                cvr.savings.kwh_percent,
                cvr.savings.kw_percent,
                cvr.savings.kvar_percent
            ));
        }
    }
    out
}
