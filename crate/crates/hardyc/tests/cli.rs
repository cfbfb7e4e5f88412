//! End-to-end CLI checks: flags, JSON/CSV shapes, exit codes
//! (0 success, 1 verification failure, 2 usage/input error), and
//! reproducibility across thread counts.

use serde_json::Value;
use std::process::{Command, Output};

fn hardyc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardyc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout not JSON: {e}\n{}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn potential_both_methods_agree() {
    let out = hardyc(&["potential", "--d", "3", "--point", "1,0,0", "--method", "both"]);
    assert_eq!(code(&out), 0);
    let v = json_stdout(&out);
    assert_eq!(v["schema"], "hardyc/1");
    assert_eq!(v["agree"], true);
    let vc = v["value_closed"].as_f64().unwrap();
    let vs = v["value_series"].as_f64().unwrap();
    assert!((vc - vs).abs() <= 1e-10 + 4.0 * f64::EPSILON * vc);
    assert!((v["a"].as_f64().unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn potential_midpoint_value() {
    // V(a = 1/2, rho = 0) = 3π² for d = 3, dh = 1
    let out = hardyc(&["potential", "--d", "3", "--reduced", "0.5,0"]);
    assert_eq!(code(&out), 0);
    let v = json_stdout(&out);
    let vc = v["value_closed"].as_f64().unwrap();
    assert!((vc - 29.608813203268076).abs() < 1e-10);
}

#[test]
fn potential_pole_rejected() {
    let out = hardyc(&["potential", "--d", "3", "--reduced", "1,0"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("pole"), "stderr was: {err}");
}

#[test]
fn potential_malformed_point_rejected() {
    assert_eq!(code(&hardyc(&["potential", "--d", "3", "--point", "1,oops,0"])), 2);
    assert_eq!(code(&hardyc(&["potential", "--d", "3", "--point", "1,0"])), 2);
    assert_eq!(code(&hardyc(&["potential", "--d", "3"])), 2);
    assert_eq!(
        code(&hardyc(&["potential", "--d", "3", "--reduced", "0.3,0.3", "--method", "huh"])),
        2
    );
}

#[test]
fn bounds_values_and_rejection() {
    let out = hardyc(&["bounds", "--d", "3", "--r", "0.5"]);
    assert_eq!(code(&out), 0);
    let v = json_stdout(&out);
    assert!((v["lower"].as_f64().unwrap() - 0.091095205414931296).abs() < 1e-14);
    assert_eq!(v["upper"].as_f64().unwrap(), 0.25);
    assert!((v["c1"].as_f64().unwrap() - 0.87356377521164499).abs() < 1e-14);
    assert!((v["alpha_opt"].as_f64().unwrap() + 0.091095205414931296).abs() < 1e-14);

    let out = hardyc(&["bounds", "--d", "3", "--r", "0.05"]);
    let v = json_stdout(&out);
    assert!((v["lower"].as_f64().unwrap() - 0.24400882646437288).abs() < 1e-14);

    assert_eq!(code(&hardyc(&["bounds", "--d", "2", "--r", "1"])), 2);
}

#[test]
fn verify_suites_exit_codes() {
    for suite in ["identities", "supersolution", "local", "allegretto"] {
        let out = hardyc(&[
            "verify", "--suite", suite, "--samples", "200", "--seed", "7",
        ]);
        assert_eq!(code(&out), 0, "suite {suite}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json_stdout(&out);
        assert_eq!(v["pass"], true);
        assert_eq!(v["schema"], "hardyc/1");
    }
    let out = hardyc(&[
        "verify", "--suite", "thm35", "--r", "1.0", "--samples", "5", "--seed", "7",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&hardyc(&["verify", "--suite", "nonsense"])), 2);
}

#[test]
fn verify_sandwich_reports_honest_failure() {
    // the discrete upper check fails on any feasible mesh at delta = 1e-3·h;
    // the lower check must hold
    let out = hardyc(&[
        "verify", "--suite", "sandwich", "--d", "3", "--r", "0.5", "--grid", "32x16",
    ]);
    assert_eq!(code(&out), 1);
    let v = json_stdout(&out);
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks[0]["pass"], true, "lower bound must hold: {v}");
    assert_eq!(checks[1]["pass"], false);
}

#[test]
fn mu_single_grid_and_ladder() {
    let out = hardyc(&["mu", "--d", "3", "--r", "0.5", "--grid", "16x8", "--delta", "1e-2"]);
    // exit 1: the sandwich verdict fails on the upper side (see above)
    assert_eq!(code(&out), 1);
    let v = json_stdout(&out);
    assert_eq!(v["report"]["lower_ok"], true);
    assert_eq!(v["report"]["upper_ok"], false);
    let mu = v["report"]["estimates"][0]["mu_hat"].as_f64().unwrap();
    assert!(mu > 0.0);

    let out = hardyc(&[
        "mu", "--d", "3", "--r", "0.5", "--ladder", "8x8,16x16,32x32", "--delta", "1e-2",
    ]);
    let v = json_stdout(&out);
    let est = v["report"]["estimates"].as_array().unwrap();
    assert_eq!(est.len(), 3);
    let mus: Vec<f64> = est.iter().map(|e| e["mu_hat"].as_f64().unwrap()).collect();
    assert!(mus[1] <= mus[0] + 1e-9 && mus[2] <= mus[1] + 1e-9, "{mus:?}");

    // malformed specs
    assert_eq!(code(&hardyc(&["mu", "--grid", "16by8"])), 2);
    assert_eq!(code(&hardyc(&["mu", "--ladder", "8x8,24x24"])), 2);
}

#[test]
fn sweep_csv_and_json() {
    let args = [
        "sweep", "--d", "3", "--r-list", "0.5,0.25", "--grid-ns", "8", "--grid-nr", "8",
        "--refinements", "0", "--delta", "1e-2",
    ];
    let out = hardyc(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "R,lower,mu_hat,upper,gap,grid,delta");
    assert_eq!(lines.count(), 2);
    assert!(!csv.contains('\r'));

    let mut jargs = args.to_vec();
    jargs.extend(["--out", "json"]);
    let out = hardyc(&jargs);
    assert_eq!(code(&out), 0);
    let v = json_stdout(&out);
    assert_eq!(v["schema"], "hardyc/1");
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);

    // unsorted list rejected
    let out = hardyc(&[
        "sweep", "--d", "3", "--r-list", "0.25,0.5", "--grid-ns", "8", "--grid-nr", "8",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_is_bit_stable_across_thread_counts() {
    let args = [
        "sweep", "--d", "3", "--r-list", "0.5,0.25", "--grid-ns", "8", "--grid-nr", "8",
        "--refinements", "0", "--delta", "1e-2",
    ];
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_hardyc"))
            .args(args)
            .env("HARDYC_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    // CSV carries no wall time, so the bytes must match exactly
    assert_eq!(run("1"), run("4"));
    // invalid env var is a usage error
    let out = Command::new(env!("CARGO_BIN_EXE_hardyc"))
        .args(["bounds", "--d", "3", "--r", "1"])
        .env("HARDYC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_records_validate_against_shipped_schema() {
    let schema_path = concat!(env!("CARGO_MANIFEST_DIR"), "/schemas/hardyc-1.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap())
        .expect("schema file is valid JSON");
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let records: Vec<(&str, Vec<&str>)> = vec![
        ("potential", vec!["potential", "--d", "3", "--point", "1,0,0", "--method", "both"]),
        ("potential-reduced", vec!["potential", "--d", "4", "--reduced", "0.5,0.3"]),
        ("bounds", vec!["bounds", "--d", "3", "--r", "0.5"]),
        ("verify", vec!["verify", "--suite", "local", "--samples", "20", "--seed", "1"]),
        ("mu", vec!["mu", "--d", "3", "--r", "0.5", "--grid", "8x8", "--delta", "1e-2"]),
        (
            "sweep",
            vec![
                "sweep", "--d", "3", "--r-list", "0.5", "--grid-ns", "8", "--grid-nr", "8",
                "--refinements", "0", "--delta", "1e-2", "--out", "json",
            ],
        ),
    ];
    for (label, args) in records {
        let out = hardyc(&args);
        let v = json_stdout(&out);
        let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{label}: schema violations: {errors:?}");
    }
}

#[test]
fn sweep_single_r_matches_mu() {
    let sweep = hardyc(&[
        "sweep", "--d", "3", "--r-list", "0.5", "--grid-ns", "16", "--grid-nr", "8",
        "--refinements", "0", "--delta", "1e-2", "--out", "json",
    ]);
    let mu = hardyc(&["mu", "--d", "3", "--r", "0.5", "--grid", "16x8", "--delta", "1e-2"]);
    let vs = json_stdout(&sweep);
    let vm = json_stdout(&mu);
    let from_sweep = vs["rows"][0]["mu_hat"].as_f64().unwrap();
    let from_mu = vm["report"]["estimates"][0]["mu_hat"].as_f64().unwrap();
    assert_eq!(from_sweep, from_mu);
}
