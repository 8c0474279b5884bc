use std::fs;
use std::path::PathBuf;
use std::process::Command;

use slowfast::experiments::{default_spec, registry, run, write_outcome, Status, Sweep, SweepVariable};
use slowfast::models;

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("slowfast-test-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn every_experiment_names_a_known_model() {
    for e in registry() {
        assert!(models::entry(e.model).is_ok(), "{} uses unknown model {}", e.name, e.model);
        default_spec(e.name).unwrap().validate().unwrap();
    }
}

#[test]
fn saddle_bracket_brackets_below_1e8() {
    let out = run(&default_spec("saddle-bracket").unwrap(), 0);
    assert!(out.succeeded(), "{:?}", out.report.error);
    let k = out.summary("bracket_exponent").and_then(|v| v.as_i64()).expect("some pair stays together");
    assert!(k <= -8, "bracket exponent {k}");
    // large displacements separate
    let sides = out.table("sides").unwrap();
    assert_eq!(sides.rows[0][1], "1".into());
    assert_eq!(sides.rows[0][2], "-1".into());
}

#[test]
fn ri_base_trajectory_reaches_listed_end_point() {
    let out = run(&default_spec("ri-reduced").unwrap(), 0);
    assert!(out.succeeded(), "{:?}", out.report.error);
    let err = out.summary_f64("end_error").unwrap();
    assert!(err <= 1e-6, "end error {err:e}");
}

#[test]
fn reruns_give_identical_csv() {
    for name in ["toy-eta-order", "ri-transient"] {
        let spec = default_spec(name).unwrap();
        let a = run(&spec, 0);
        let b = run(&spec, 1);
        assert_eq!(a.tables.len(), b.tables.len());
        for (x, y) in a.tables.iter().zip(&b.tables) {
            assert_eq!(x.to_csv().unwrap(), y.to_csv().unwrap(), "{name}/{}", x.name);
        }
    }
}

#[test]
fn phase_timings_stay_below_total() {
    for name in ["linear-bvp", "ri-reduced", "ri-eps-sweep"] {
        let t = run(&default_spec(name).unwrap(), 0).report.timings;
        assert!(t.base_seconds > 0.0, "{name}");
        assert!(t.base_seconds <= t.total_seconds, "{name}: {t:?}");
        assert!(t.base_seconds + t.collocation_seconds + t.reference_seconds <= t.total_seconds, "{name}: {t:?}");
    }
}

#[test]
fn csv_numbers_have_seventeen_digits() {
    let out = run(&default_spec("linear-bvp").unwrap(), 0);
    let csv = out.table("trajectory").unwrap().to_csv().unwrap();
    assert!(!csv.contains('\r'));
    let row = csv.lines().nth(1).unwrap();
    let first = row.split(',').next().unwrap();
    let mantissa = first.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.replace('.', "").len(), 17, "{first}");
}

#[test]
fn bad_specs_are_rejected() {
    let mut spec = default_spec("toy-eta-order").unwrap();
    spec.sweep = Some(Sweep { variable: SweepVariable::Eps, values: vec![1e-3, 1e-2, 1e-4] });
    assert!(spec.validate().is_err());
    spec.sweep = Some(Sweep { variable: SweepVariable::Eps, values: vec![1e-2, -1e-3, -1e-4] });
    assert!(spec.validate().is_err());

    let mut spec = default_spec("ri-transient").unwrap();
    spec.params.insert("no_such_param".into(), 1.0);
    assert!(spec.validate().is_err());
    assert!(default_spec("no-such-experiment").is_err());
}

#[test]
fn numerical_failure_keeps_report() {
    let mut spec = default_spec("ri-transient").unwrap();
    spec.r = 5.0;
    let out = run(&spec, 0);
    assert_eq!(out.report.status, Status::Failed);
    assert_eq!(out.report.failed_phase.as_deref(), Some("transients"));
    let dir = scratch_dir("failure");
    let paths = write_outcome(&dir, &out).unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(paths.last().unwrap()).unwrap()).unwrap();
    assert_eq!(json["status"], "failed");
    assert!(json["error"].as_str().unwrap().contains("Newton"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn params_file_overrides_model() {
    let dir = scratch_dir("params");
    fs::create_dir_all(&dir).unwrap();
    let file = dir.join("params.json");
    fs::write(&file, r#"{"sigma2": 1.3}"#).unwrap();
    let mut spec = default_spec("ri-reduced").unwrap();
    spec.params = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    let out = run(&spec, 0);
    assert!(out.succeeded(), "{:?}", out.report.error);
    // a different sigma2 moves the end point away from the listed one
    assert!(out.summary_f64("end_error").unwrap() > 1e-4);
    let _ = fs::remove_dir_all(&dir);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slowfast"))
}

#[test]
fn cli_run_writes_tables_and_summary() {
    let dir = scratch_dir("cli-run");
    let status = cli().args(["run", "ri-transient", "--eps", "1e-3", "--r", "0.1", "--out"]).arg(&dir).status().unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,tau,q0,q1,") || csv.starts_with("t,tau,x0,x1,"), "{}", &csv[..40]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["status"], "ok");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn cli_exit_codes() {
    let dir = scratch_dir("cli-codes");
    let failed = cli().args(["run", "ri-transient", "--r", "5", "--out"]).arg(&dir).status().unwrap();
    assert_eq!(failed.code(), Some(2));
    assert!(dir.join("summary.json").exists());
    let usage = cli().args(["run", "toy-eta-order", "--eps", "1e-3,1e-2,1e-4", "--out"]).arg(&dir).status().unwrap();
    assert_eq!(usage.code(), Some(1));
    let list = cli().arg("list").output().unwrap();
    assert!(list.status.success());
    assert!(String::from_utf8_lossy(&list.stdout).contains("fhn-homoclinic"));
    let validate = cli().args(["validate", "lindemann"]).output().unwrap();
    assert!(validate.status.success());
    let _ = fs::remove_dir_all(&dir);
}
