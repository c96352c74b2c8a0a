//! End-to-end tests of the `vvc` binary (which talks to its embedded
//! service over a loopback socket).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

fn vvc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vvc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("vvc runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_mini_scenario(dir: &Path, minutes: u32) {
    std::fs::write(
        dir.join("load.csv"),
        "timestamp,pz_mw,pz_mvar,pi_mw,pi_mvar,pp_mw,pp_mvar,pe_kwh\n\
         2013-04-23T00:00:00Z,4.0,1.0,2.0,0.5,3.0,0.3,0.2\n\
         2013-04-23T02:00:00Z,5.0,1.4,2.4,0.6,3.4,0.4,0.3\n",
    )
    .unwrap();
    std::fs::write(dir.join("hv.csv"), "timestamp,kv\n2013-04-23T00:00:00Z,66.0\n").unwrap();
    let rulebase = config_dir().join("rulebase");
    std::fs::write(
        dir.join("scenario.json"),
        format!(
            r#"{{
  "name": "mini",
  "start": "2013-04-23T00:00:00Z",
  "end": "2013-04-23T00:{minutes:02}:00Z",
  "seed": 7,
  "controller": {{ "kind": "fis" }},
  "rulebase": {{ "variables": "{}", "rules": "{}" }},
  "load_profile": "load.csv",
  "hv_profile": "hv.csv",
  "initial_tap": 3,
  "initial_breaker_closed": false
}}"#,
            rulebase.join("variables.json").display(),
            rulebase.join("rules.txt").display(),
        ),
    )
    .unwrap();
}

#[test]
fn validate_shipped_scenario_reports_shape_and_exits_zero() {
    let scenario = config_dir().join("scenarios/reference/scenario.json");
    let out = vvc(
        &["validate", "--scenario", scenario.to_str().unwrap()],
        &config_dir(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("14 rules, 5 inputs, 2 outputs"), "{text}");
}

#[test]
fn validate_undeclared_set_names_line_and_set() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(
        config_dir().join("rulebase/variables.json"),
        dir.path().join("variables.json"),
    )
    .unwrap();
    std::fs::write(
        dir.path().join("rules.txt"),
        "If (Voltage is G) then (Taps is 0)\nIf (Voltage is XXL) then (Taps is 0)\n",
    )
    .unwrap();
    let out = vvc(
        &[
            "validate",
            "--variables",
            "variables.json",
            "--rules",
            "rules.txt",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let text = stderr(&out);
    assert!(text.contains("line 2"), "{text}");
    assert!(text.contains("XXL"), "{text}");
}

#[test]
fn validate_missing_load_csv_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_scenario(dir.path(), 10);
    std::fs::remove_file(dir.path().join("load.csv")).unwrap();
    let out = vvc(&["validate", "--scenario", "scenario.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("load.csv"), "{}", stderr(&out));
}

#[test]
fn infer_prints_intermediates_and_matches_the_library() {
    let rulebase = config_dir().join("rulebase");
    let vars = rulebase.join("variables.json");
    let rules = rulebase.join("rules.txt");

    // neutral operating point: no movement, capacitor held
    let out = vvc(
        &[
            "infer",
            "--variables",
            vars.to_str().unwrap(),
            "--rules",
            rules.to_str().unwrap(),
            "-i",
            "Voltage=21.0",
            "-i",
            "Reactive_power=0.5",
            "-i",
            "Tap=3",
            "-i",
            "Shunt=1",
            "-i",
            "Period=0",
        ],
        &config_dir(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Taps = 0.000000"), "{text}");
    assert!(text.contains("Capacitor = 0.000000"), "{text}");
    assert!(text.contains("activations:"), "{text}");

    // high voltage with good reactive power: one step down, as the library
    // (itself cross-checked against the fine-grid reference) computes
    let out = vvc(
        &[
            "infer",
            "--variables",
            vars.to_str().unwrap(),
            "--rules",
            rules.to_str().unwrap(),
            "-i",
            "Voltage=21.5",
            "-i",
            "Reactive_power=2.0",
            "-i",
            "Tap=2",
            "-i",
            "Shunt=1",
            "-i",
            "Period=0",
        ],
        &config_dir(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let printed: f64 = text
        .lines()
        .find_map(|l| l.trim().strip_prefix("Taps = "))
        .unwrap()
        .parse()
        .unwrap();
    let rb = vvc_core::rules::load_rulebase_files(&vars, &rules, None).unwrap();
    let inputs: indexmap::IndexMap<String, f64> = [
        ("Voltage".to_string(), 21.5),
        ("Reactive_power".to_string(), 2.0),
        ("Tap".to_string(), 2.0),
        ("Shunt".to_string(), 1.0),
        ("Period".to_string(), 0.0),
    ]
    .into_iter()
    .collect();
    let expected = rb.infer(&inputs).unwrap()["Taps"];
    assert!((printed - expected).abs() < 1e-6, "{printed} vs {expected}");
    assert!(printed < -0.9, "expected a lowering output, got {printed}");
}

#[test]
fn run_is_deterministic_and_artifacts_reload() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_scenario(dir.path(), 10);
    for out_name in ["a", "b"] {
        let out = vvc(
            &[
                "run",
                "--scenario",
                "scenario.json",
                "--out",
                out_name,
                "--seed",
                "11",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("150 samples"), "{}", stdout(&out));
    }
    for name in [
        "telemetry.csv",
        "voltage.csv",
        "pf.csv",
        "p_mw.csv",
        "q_mvar.csv",
        "actions.csv",
        "events.jsonl",
        "metrics.json",
    ] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs under a fixed seed");
    }
}

#[test]
fn run_missing_scenario_exits_with_the_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = vvc(
        &["run", "--scenario", "missing.json", "--out", "x"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("missing.json"));
}

#[test]
fn compare_run_against_itself_shows_zero_reductions() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_scenario(dir.path(), 10);
    let out = vvc(
        &["run", "--scenario", "scenario.json", "--out", "a"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = vvc(
        &["compare", "a", "a", "--json", "report.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("average loss ratio 1.0000"), "{text}");
    assert!(text.contains("loss reduction 0.00%"), "{text}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pairs"][0]["average_loss_ratio"], 1.0);
}

#[test]
fn compare_mismatched_horizons_is_a_config_failure() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_scenario(dir.path(), 10);
    let out = vvc(
        &["run", "--scenario", "scenario.json", "--out", "short"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    write_mini_scenario(dir.path(), 20);
    let out = vvc(
        &["run", "--scenario", "scenario.json", "--out", "long"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = vvc(&["compare", "short", "long"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("horizon mismatch"), "{}", stderr(&out));
}

#[test]
fn controller_and_ref_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_scenario(dir.path(), 10);
    let out = vvc(
        &[
            "run",
            "--scenario",
            "scenario.json",
            "--out",
            "avr",
            "--controller",
            "deadband",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("controller deadband"), "{}", stdout(&out));

    let out = vvc(
        &[
            "run",
            "--scenario",
            "scenario.json",
            "--out",
            "reduced",
            "--ref-kv",
            "20.475",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("ref 20.475"), "{}", stdout(&out));

    let out = vvc(
        &[
            "run",
            "--scenario",
            "scenario.json",
            "--out",
            "bad",
            "--controller",
            "genetic",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
