use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use solvq::RunConfig;
use solvq_core::CoefficientSpec;

fn solvq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solvq"))
        .args(args)
        .env("SOLVQ_THREADS", "2")
        .output()
        .expect("spawn solvq")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const IDENTITY: &str = r#"{"coefficients":{"kind":"constant","r0":1.0,"q0":1.0}}"#;

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn identity_is_not_solvable_in_c() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "id.json", IDENTITY);
    let v = json(&solvq(&["--config", &cfg, "classify", "--space", "C"]));
    assert_eq!(v["schema"], "solvq/1");
    assert_eq!(v["decision"], "NotSolvable");
    assert_eq!(v["config"]["coefficients"]["kind"], "constant");
}

#[test]
fn identity_is_solvable_in_l2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "id.json", IDENTITY);
    let v = json(&solvq(&["--config", &cfg, "classify", "--space", "L2"]));
    assert_eq!(v["decision"], "Solvable");
}

#[test]
fn example8_fast_oscillation_solvable_above_threshold() {
    let v = json(&solvq(&[
        "example8", "--alpha", "-1", "--beta", "1", "--gamma", "1", "--space", "L5",
    ]));
    assert_eq!(v["decision"], "Solvable");
    assert_eq!(v["mode"], "Symbolic");
    assert_eq!(v["alpha"], -1.0);
}

#[test]
fn d_scan_of_identity_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "id.json", IDENTITY);
    let out = solvq(&["--config", &cfg, "d-scan"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,d,residual"));
    let mut n = 0;
    for line in lines {
        let d: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((d - 1.0).abs() < 1e-9, "{line}");
        n += 1;
    }
    assert!(n > 100);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "id.json", IDENTITY);
    let args = [
        "--config",
        cfg.as_str(),
        "norms",
        "--p",
        "2",
        "--samples",
        "24",
        "--seed",
        "7",
    ];
    let a = solvq(&args);
    let b = solvq(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["contained"], true);
}

#[test]
fn out_file_and_config_echo_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(CoefficientSpec::Constant { r0: 2.0, q0: 0.5 });
    cfg.seed = 11;
    cfg.tolerances.green = 1e-9;
    let cfg_path = dir.path().join("cfg.json");
    solvq::write_config(&cfg, &cfg_path).unwrap();
    let report = dir.path().join("report.json");
    let out = solvq(&[
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "classify",
        "--space",
        "L1",
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let echo = dir.path().join("echo.json");
    std::fs::write(&echo, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    assert_eq!(RunConfig::load(&echo).unwrap(), cfg);
}

#[test]
fn solve_csv_matches_closed_form() {
    // r = q = 1, f = 1 on [0, 1]: y = 1 - e^{x-1} inside, e^x (1 - e^{-1}) left of it
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "id.json", IDENTITY);
    let out = solvq(&[
        "--config",
        &cfg,
        "solve",
        "--f",
        "indicator[0,1]",
        "--xmin",
        "-2",
        "--xmax",
        "2",
        "--n",
        "41",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let x = cells[0];
        let exact = if x >= 1.0 {
            0.0
        } else if x >= 0.0 {
            1.0 - (x - 1.0).exp()
        } else {
            x.exp() * (1.0 - (-1.0f64).exp())
        };
        assert!((cells[1] - exact).abs() < 1e-7, "x={x}: {} vs {exact}", cells[1]);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(solvq(&["--help"]).status.code(), Some(0));
    assert_eq!(solvq(&["frobnicate"]).status.code(), Some(1));
    // config required
    let out = solvq(&["classify", "--space", "C"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    // p outside (1, inf)
    let out = solvq(&[
        "example8", "--alpha", "0", "--beta", "1", "--gamma", "1", "--space", "L0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"coefficients":{"kind":"constant","r0":1,"q0":1},"bogus":1}"#,
    );
    assert_eq!(solvq(&["--config", &bad, "d-scan"]).status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        solvq(&["--config", missing.to_str().unwrap(), "d-scan"]).status.code(),
        Some(1)
    );

    // a definite verdict is not affected by --strict
    let out = solvq(&[
        "--strict", "example8", "--alpha", "0", "--beta", "1", "--gamma", "1", "--space", "L2",
    ]);
    assert_eq!(out.status.code(), Some(0));
}
