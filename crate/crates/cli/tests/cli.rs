use std::path::PathBuf;
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn ccid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccid")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn reference_scenario_verifies() {
    let path = scenarios().join("reference.json");
    let out = ccid(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("488/271"), "{text}");
    assert!(!text.contains("false"), "{text}");
}

#[test]
fn confounded_scenario_exits_with_check_failure() {
    let path = scenarios().join("confounded.json");
    let out = ccid(&["verify", path.to_str().unwrap(), "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows[0]["theorem"], "T1");
    assert_eq!(rows[0]["equal"], false);
    assert_eq!(rows[0]["assumptions"]["exchangeability_by_construction"], false);
}

#[test]
fn counterexample_prints_both_odds_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccid(&["counterexample", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("available laws equal: true"), "{text}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("counterexample.json")).unwrap()).unwrap();
    for key in ["or1", "or2"] {
        let f = &report[key];
        let shown = format!("{}/{}", f["numerator"].as_str().unwrap(), f["denominator"].as_str().unwrap());
        assert!(text.contains(&shown), "{shown} not in {text}");
    }
    assert_ne!(report["or1"]["value"], report["or2"]["value"]);
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x", "dgp": "missing.json", "theorems": ["T1"], "run": {"mode": "exact"}}"#).unwrap();
    let out = ccid(&["verify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    std::fs::write(&bad, r#"{"K": 0}"#).unwrap();
    assert_eq!(ccid(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ccid(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn validate_reports_positivity_and_homogeneity() {
    let spec = scenarios().join("specs/reference.json");
    let out = ccid(&["validate", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("positivity: yes"), "{text}");
    assert!(text.contains("H7: holds"), "{text}");

    let spec = scenarios().join("specs/confounded.json");
    let out = ccid(&["validate", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("exchangeability by construction: NO"));

    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&spec).unwrap()).unwrap();
    v["kernels"]["A"] = serde_json::json!({"type": "table", "rows": [{"when": {"l": 1}, "p": "1"}, {"p": "1/2"}]});
    let path = dir.path().join("deterministic.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let out = ccid(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("positivity: NO"));
}

#[test]
fn simulation_output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = scenarios().join("specs/reference.json");
    let scenario = serde_json::json!({
        "name": "small_mc",
        "dgp": spec,
        "theorems": ["T1", "T7", "T9"],
        "run": {"mode": "monte_carlo", "n_cohort": 3000, "reps": 4, "seed": 7}
    });
    let path = dir.path().join("small_mc.json");
    std::fs::write(&path, scenario.to_string()).unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "8"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out =
            ccid(&["simulate", path.to_str().unwrap(), "--threads", threads, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        csvs.push(std::fs::read(out_dir.join("simulate.csv")).unwrap());
    }
    assert!(csvs[0].len() > 100);
    assert_eq!(csvs[0], csvs[1]);
}
