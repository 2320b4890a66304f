use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const P0: [&str; 10] = [
    "--kappa", "1", "--theta", "0.04", "--sigma", "0.25", "--rho", "-0.5", "--v0", "0.04",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heston-svi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_p0<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(P0);
    v.extend(extra);
    v
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heston-svi-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn asymptote_closed_form_rows() {
    let out = run(&with_p0(
        "asymptote",
        &[
            "--xmin", "-0.1", "--xmax", "0.1", "--n", "5", "--form", "closed",
        ],
    ));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "x,variance");
    assert_eq!(rows.len(), 6);
    let mid: Vec<f64> = rows[3].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(mid[0], 0.0);
    assert!((mid[1] - 0.037_549_862_670_959_93).abs() < 1e-15);
}

#[test]
fn asymptote_single_atm_row_and_stable_output() {
    let args = with_p0("asymptote", &["--xmin", "0", "--xmax", "0", "--n", "1"]);
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn large_correlation_regime_exits_with_input_error() {
    let bad = [
        "--kappa", "0.1", "--theta", "0.04", "--sigma", "0.3", "--rho", "0.9", "--v0", "0.04",
    ];
    for cmd in ["asymptote", "verify", "saddle-check"] {
        let mut args = vec![cmd];
        args.extend(bad);
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains("large correlation regime"), "{cmd}: {err}");
    }
}

#[test]
fn verify_passes_on_p0_and_random_sets() {
    let out = run(&with_p0("verify", &[]));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert!(r["max_deviation"].as_f64().unwrap() <= 1e-10);

    let out = run(&with_p0("verify", &["--grid", "0"]));
    assert!(json(&out)["max_deviation"].as_f64().unwrap() <= 1e-14);

    let out = run(&["verify", "--seed", "11", "--count", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["outputs"]["sets"].as_array().unwrap().len(), 100);
}

#[test]
fn verify_fails_with_exit_one_under_impossible_tolerance() {
    let out = run(&with_p0("verify", &["--tol", "1e-300"]));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn report_keys_are_sorted() {
    let out = run(&with_p0("map-params", &["--T", "10"]));
    let text = String::from_utf8(out.stdout).unwrap();
    let top: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \""))
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
}

#[test]
fn saddle_check_uncorrelated_reports_zero_saddle() {
    let out = run(&[
        "saddle-check",
        "--kappa",
        "1",
        "--theta",
        "0.04",
        "--sigma",
        "0.25",
        "--rho",
        "0",
        "--v0",
        "0.04",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(
        r["outputs"]["sets"][0]["u_tilde_atm_im"].as_f64(),
        Some(0.0)
    );
}

#[test]
fn map_params_reports_both_forms() {
    let out = run(&with_p0("map-params", &["--T", "10"]));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["outputs"]["omega"]["omega2"].as_f64(), Some(6.25));
    assert!((r["outputs"]["raw"]["m"].as_f64().unwrap() - 0.8).abs() < 1e-15);
    assert!(
        (r["outputs"]["raw"]["sigma_tilde"].as_f64().unwrap() - 1.385_640_646_055_101_6).abs()
            < 1e-12
    );
}

#[test]
fn smile_then_fit_reads_off_correlation() {
    let csv = scratch("t50.csv");
    let out = run(&with_p0(
        "smile",
        &[
            "--T",
            "50",
            "--xmin",
            "-0.1",
            "--xmax",
            "0.2",
            "--n",
            "21",
            "--out",
            csv.to_str().unwrap(),
        ],
    ));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# T="));
    assert!(text.lines().any(|l| l == "k,vol"));

    let out = run(&["fit", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let orientation = r["outputs"]["interpretation"]["correlation"]
        .as_f64()
        .unwrap();
    assert!((orientation + 0.5).abs() <= 0.02, "{orientation}");
    assert!(r["outputs"].get("history").is_none());
}

#[test]
fn fit_rejects_short_smile() {
    let csv = scratch("short.csv");
    std::fs::write(&csv, "# T=1\nk,vol\n-0.1,0.2\n0,0.19\n0.1,0.2\n0.2,0.21\n").unwrap();
    let out = run(&["fit", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("underdetermined"));
}

#[test]
fn converge_passes_on_p0() {
    let out = run(&with_p0("converge", &["--tlist", "1,5,20,50"]));
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["outputs"]["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn config_file_supplies_parameters() {
    let cfg = scratch("p0.json");
    std::fs::write(
        &cfg,
        r#"{"kappa": 1, "theta": 0.04, "sigma": 0.25, "rho": -0.5, "v0": 0.04, "T": 10}"#,
    )
    .unwrap();
    let out = run(&["map-params", "--config", cfg.to_str().unwrap(), "--T", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["inputs"]["T"].as_f64(), Some(20.0));
    assert_eq!(r["outputs"]["raw"]["T"].as_f64(), Some(20.0));
}

#[test]
fn thread_cap_does_not_change_output() {
    let args = with_p0("smile", &["--T", "2", "--n", "9"]);
    let one = Command::new(env!("CARGO_BIN_EXE_heston-svi"))
        .args(&args)
        .env("HESTON_SVI_THREADS", "1")
        .output()
        .unwrap();
    let many = run(&args);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, many.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_heston-svi"))
        .args(&args)
        .env("HESTON_SVI_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn missing_parameters_are_input_errors() {
    let out = run(&["asymptote", "--kappa", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["verify"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["bogus"]);
    assert_eq!(out.status.code(), Some(2));
}
