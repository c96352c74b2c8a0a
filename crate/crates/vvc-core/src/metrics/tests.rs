use chrono::{Duration, TimeZone, Utc};

use super::*;

fn series(values: &[f64]) -> Vec<SeriesSample> {
    let t0 = Utc.with_ymd_and_hms(2013, 4, 23, 0, 0, 0).unwrap();
    values
        .iter()
        .enumerate()
        .map(|(i, &value)| SeriesSample {
            timestamp: t0 + Duration::seconds(4 * i as i64),
            value,
        })
        .collect()
}

/// Frozen voltage fixture whose statistics reproduce the reference run this
/// toolkit reports against: mean 21.0537, max dev 0.3000, mean dev 0.0792.
pub const FIS_DAY_FIXTURE: [f64; 10] = [
    21.3, 21.2, 21.1645, 20.8725, 21.0, 21.0, 21.0, 21.0, 21.0, 21.0,
];

#[test]
fn constant_series_has_zero_deviations() {
    let stats = voltage_stats(&series(&[21.0; 8]), 21.0).unwrap();
    assert_eq!(stats.mean_kv, 21.0);
    assert_eq!(stats.max_deviation_kv, 0.0);
    assert_eq!(stats.mean_deviation_kv, 0.0);
}

#[test]
fn symmetric_two_sample_series() {
    let stats = voltage_stats(&series(&[21.5, 20.5]), 21.0).unwrap();
    assert!((stats.max_deviation_kv - 0.5).abs() < 1e-12);
    assert!((stats.mean_deviation_kv - 0.5).abs() < 1e-12);
    assert!((stats.mean_kv - 21.0).abs() < 1e-12);
}

#[test]
fn fixture_reproduces_frozen_statistics_to_four_decimals() {
    let stats = voltage_stats(&series(&FIS_DAY_FIXTURE), 21.0).unwrap();
    assert!((stats.mean_kv - 21.0537).abs() < 5e-5, "{}", stats.mean_kv);
    assert!(
        (stats.max_deviation_kv - 0.3000).abs() < 5e-5,
        "{}",
        stats.max_deviation_kv
    );
    assert!(
        (stats.mean_deviation_kv - 0.0792).abs() < 5e-5,
        "{}",
        stats.mean_deviation_kv
    );
}

#[test]
fn deviations_are_shift_equivariant_and_ordered() {
    let base = [21.31, 20.52, 21.07, 20.93, 21.44, 20.88];
    let reference = voltage_stats(&series(&base), 21.0).unwrap();
    for shift in [-3.0, -0.525, 0.7, 12.0] {
        let shifted: Vec<f64> = base.iter().map(|v| v + shift).collect();
        let stats = voltage_stats(&series(&shifted), 21.0 + shift).unwrap();
        assert!((stats.max_deviation_kv - reference.max_deviation_kv).abs() < 1e-12);
        assert!((stats.mean_deviation_kv - reference.mean_deviation_kv).abs() < 1e-12);
        assert!(stats.mean_deviation_kv <= stats.max_deviation_kv);
    }
}

#[test]
fn empty_and_unordered_series_are_rejected() {
    assert!(matches!(
        voltage_stats(&[], 21.0),
        Err(MetricsError::EmptySeries)
    ));
    let mut s = series(&[21.0, 21.1]);
    s[1].timestamp = s[0].timestamp;
    assert!(matches!(
        check_series(&s),
        Err(MetricsError::NonMonotonicSeries { row: 2 })
    ));
}

#[test]
fn loss_ratio_examples() {
    assert_eq!(loss_ratio(0.98, 0.98).unwrap(), 1.0);
    assert!((loss_ratio(0.93, 1.00).unwrap() - 0.8649).abs() < 1e-12);
    // sign-carrying inputs use magnitudes
    assert!((loss_ratio(-0.93, 1.00).unwrap() - 0.8649).abs() < 1e-12);
    assert!(loss_ratio(0.0, 0.9).is_err());
    assert!(loss_ratio(0.9, 0.0).is_err());
}

#[test]
fn loss_reduction_prints_expected_percentages() {
    assert_eq!(format!("{:.2}", loss_reduction_percent(0.8660)), "13.40");
    assert_eq!(format!("{:.2}", loss_reduction_percent(0.9750)), "2.50");
    assert_eq!(format!("{:.2}", loss_reduction_percent(0.9312)), "6.88");
}

#[test]
fn reciprocal_loss_ratios_multiply_to_one() {
    let pfs = [0.31, 0.5, 0.821, 0.93, 0.98, 1.0];
    for &a in &pfs {
        for &b in &pfs {
            let fwd = loss_ratio(a, b).unwrap();
            let back = loss_ratio(b, a).unwrap();
            assert!((fwd * back - 1.0).abs() < 1e-12, "{a} {b}");
        }
    }
}

#[test]
fn average_loss_ratio_examples() {
    let a = series(&[0.99, 0.98, 0.985]);
    assert_eq!(average_loss_ratio(&a, &a).unwrap(), 1.0);

    // constant series equal the scalar ratio
    let opf = series(&[0.95; 5]);
    let fis = series(&[0.99; 5]);
    let avg = average_loss_ratio(&opf, &fis).unwrap();
    let scalar = loss_ratio(0.95, 0.99).unwrap();
    assert!((avg - scalar).abs() < 1e-15);

    let short = series(&[0.95; 4]);
    assert!(matches!(
        average_loss_ratio(&opf, &short),
        Err(MetricsError::MisalignedSeries { .. })
    ));
    let mut offset = fis.clone();
    offset[2].timestamp += Duration::seconds(1);
    assert!(average_loss_ratio(&opf, &offset).is_err());
}

#[test]
fn cvr_savings_reproduce_field_trial_ranges() {
    let factors = CvrFactors::FIELD_TRIAL_FEEDER;
    let zero = cvr_savings(0.0, &factors).unwrap();
    assert_eq!(
        (zero.kwh_percent, zero.kw_percent, zero.kvar_percent),
        (0.0, 0.0, 0.0)
    );

    let low = cvr_savings(0.65, &factors).unwrap();
    let high = cvr_savings(0.77, &factors).unwrap();
    assert!((low.kwh_percent - 0.4485).abs() < 1e-9);
    assert!((high.kwh_percent - 0.5313).abs() < 1e-9);
    assert!((low.kw_percent - 0.507).abs() < 1e-9);
    assert!((high.kw_percent - 0.6006).abs() < 1e-9);
    assert!((low.kvar_percent - 2.2425).abs() < 1e-9);
    assert!((high.kvar_percent - 2.6565).abs() < 1e-9);
    // rounded to two decimals these are the 0.44-0.53 / 0.51-0.60 / 2.24-2.65 bands
    assert_eq!(format!("{:.2}", low.kwh_percent), "0.45");
    assert_eq!(format!("{:.2}", high.kwh_percent), "0.53");

    assert!(cvr_savings(-0.1, &factors).is_err());
}

#[test]
fn cvr_savings_at_policy_change_truncate_as_published() {
    let s = cvr_savings(2.5, &CvrFactors::FIELD_TRIAL_FEEDER).unwrap();
    assert!((s.kwh_percent - 1.725).abs() < 1e-9);
    assert!((s.kw_percent - 1.95).abs() < 1e-9);
    assert!((s.kvar_percent - 8.625).abs() < 1e-9);
    let trunc = |x: f64| (x * 100.0).trunc() / 100.0;
    assert_eq!(trunc(s.kwh_percent), 1.72);
    assert_eq!(trunc(s.kw_percent), 1.95);
    assert_eq!(trunc(s.kvar_percent), 8.62);
}

#[test]
fn cvr_savings_are_linear_in_reduction_and_factors() {
    let factors = CvrFactors {
        kwh: 0.76,
        kw: 0.99,
        kvar: 0.41,
        per_class: None,
    };
    for dv in [0.1, 0.65, 1.3, 2.5] {
        let one = cvr_savings(dv, &factors).unwrap();
        let two = cvr_savings(2.0 * dv, &factors).unwrap();
        assert!((two.kwh_percent - 2.0 * one.kwh_percent).abs() < 1e-12);
        assert!((two.kw_percent - 2.0 * one.kw_percent).abs() < 1e-12);
        let doubled = CvrFactors {
            kwh: factors.kwh * 2.0,
            ..factors
        };
        let scaled = cvr_savings(dv, &doubled).unwrap();
        assert!((scaled.kwh_percent - 2.0 * one.kwh_percent).abs() < 1e-12);
    }
}

#[test]
fn per_class_factors_ride_along_in_reports() {
    let feeder = CvrFactors::FIELD_TRIAL_FEEDER;
    let classes = feeder.per_class.unwrap();
    assert_eq!(
        (classes.domestic_kwh, classes.commercial_kwh, classes.industrial_kwh),
        (0.76, 0.99, 0.41)
    );
    let json = serde_json::to_value(feeder).unwrap();
    assert_eq!(json["per_class"]["domestic_kwh"], 0.76);
}

#[test]
fn summaries_echo_power_means_at_four_decimals() {
    // the table formatting contract: kV and MW at four decimals
    let runs = vec![
        (summary_with_power("opf-16", 21.1914, 0.2192, 17.2075, -0.7811), series(&[0.99; 4])),
        (summary_with_power("opf-22", 21.2178, 0.2251, 16.7620, -0.1583), series(&[0.99; 4])),
        (summary_with_power("fis-23", 21.0537, 0.0792, 14.8236, 0.2622), series(&[0.99; 4])),
    ];
    let report = comparison_report(&runs, 0, &CvrFactors::FIELD_TRIAL_FEEDER).unwrap();
    let text = render_text(&report);
    for needle in [
        "21.1914", "21.2178", "21.0537", "0.2192", "0.2251", "0.0792", "17.2075", "16.7620",
        "14.8236", "-0.7811", "-0.1583", "0.2622",
    ] {
        assert!(text.contains(needle), "missing {needle} in:\n{text}");
    }
}

fn summary_with_power(name: &str, mean: f64, dm: f64, p: f64, q: f64) -> RunSummary {
    let mut s = summary(name, mean, dm);
    s.p_mean_mw = p;
    s.q_mean_mvar = q;
    s
}

#[test]
fn cvr_factor_is_the_quotient() {
    assert!((cvr_factor(0.69, 1.0).unwrap() - 0.69).abs() < 1e-12);
    assert!((cvr_factor(1.725, 2.5).unwrap() - 0.69).abs() < 1e-12);
    assert!(cvr_factor(1.0, 0.0).is_err());
}

fn summary(name: &str, mean: f64, dm: f64) -> RunSummary {
    RunSummary {
        name: name.into(),
        samples: 100,
        voltage: VoltageStats {
            mean_kv: mean,
            max_deviation_kv: dm * 2.0,
            mean_deviation_kv: dm,
            reference_kv: 21.0,
        },
        p_mean_mw: 15.0,
        q_mean_mvar: 0.2,
        pf_at_least_098: 1.0,
        pf_at_least_099: 0.95,
        tap_operations: 11,
        capacitor_operations: 2,
    }
}

#[test]
fn report_on_identical_runs_shows_zero_reductions() {
    let pf = series(&[0.99; 6]);
    let runs = vec![
        (summary("a", 21.0, 0.1), pf.clone()),
        (summary("b", 21.0, 0.1), pf),
    ];
    let report = comparison_report(&runs, 0, &CvrFactors::FIELD_TRIAL_FEEDER).unwrap();
    let pair = &report.pairs[0];
    assert_eq!(pair.average_loss_ratio, 1.0);
    assert_eq!(pair.loss_reduction_percent, 0.0);
    assert_eq!(pair.mean_deviation_reduction_percent, Some(0.0));
    assert_eq!(pair.delta_v_percent, 0.0);
    let text = render_text(&report);
    assert!(text.contains("loss reduction 0.00%"), "{text}");
}

#[test]
fn report_reproduces_the_mean_deviation_drop_figure() {
    // baseline D_m 0.2251 vs candidate 0.0792: a 64.8 % drop, i.e. the
    // candidate retains 35.18 % of the baseline deviation
    let pf = series(&[0.99; 6]);
    let runs = vec![
        (summary("opf", 21.2178, 0.2251), pf.clone()),
        (summary("fis", 21.0537, 0.0792), pf),
    ];
    let report = comparison_report(&runs, 0, &CvrFactors::FIELD_TRIAL_FEEDER).unwrap();
    let pair = &report.pairs[0];
    let reduction = pair.mean_deviation_reduction_percent.unwrap();
    let residual = pair.mean_deviation_residual_percent.unwrap();
    assert!((reduction - 64.8156).abs() < 5e-3, "{reduction}");
    assert!((residual - 35.1844).abs() < 5e-3, "{residual}");
    // mean voltage reduction matches the published 0.77 % for this pair
    assert!((pair.delta_v_percent - 0.77).abs() < 5e-3, "{}", pair.delta_v_percent);
    let cvr = pair.cvr.as_ref().unwrap();
    assert!((cvr.savings.kwh_percent - 0.5313).abs() < 5e-3);
}

#[test]
fn higher_candidate_voltage_omits_the_cvr_block() {
    let pf = series(&[0.99; 6]);
    let runs = vec![
        (summary("base", 21.0, 0.1), pf.clone()),
        (summary("up", 21.2, 0.1), pf),
    ];
    let report = comparison_report(&runs, 0, &CvrFactors::FIELD_TRIAL_FEEDER).unwrap();
    assert!(report.pairs[0].cvr.is_none());
    assert!(report.pairs[0].delta_v_percent < 0.0);
}
