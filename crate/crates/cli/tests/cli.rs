use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn vicsek(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vicsek"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn vicsek")
}

/// Header plus rows of a CSV artifact, after checking the units line.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# units: "));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

const QUADRATIC_NU: [&str; 6] = [
    "--set",
    "model.nu.law=power",
    "--set",
    "model.nu.coef=1",
    "--set",
    "model.nu.exponent=2",
];

#[test]
fn constant_laws_give_unit_lambda() {
    let tmp = TempDir::new().unwrap();
    let out = vicsek(tmp.path(), &["--out", "o", "coeffs"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("o/coeffs.csv"));
    assert_eq!(rows.len(), 4);
    let lam = column(&header, "lambda");
    for r in &rows {
        let v: f64 = r[lam].parse().unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
    assert!(tmp.path().join("o/coeffs.json").exists());
}

#[test]
fn quadratic_alignment_map_has_both_verdicts() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["--out", "o"];
    args.extend(QUADRATIC_NU);
    args.extend(["--set", "hyperbolicity_map.theta.steps=3", "hyperbolicity-map"]);
    let out = vicsek(tmp.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("o/hyperbolicity_map.csv"));
    let v = column(&header, "full_verdict");
    assert!(rows.iter().any(|r| r[v] == "hyperbolic"));
    assert!(rows.iter().any(|r| r[v] == "not_hyperbolic"));
}

#[test]
fn planar_gci_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let out = vicsek(tmp.path(), &["--out", "o", "gci", "--kappa", "1", "--dim", "2", "--grid", "1024"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&tmp.path().join("o/gci.csv"));
    let (g, exact) = (column(&header, "g"), column(&header, "g_closed"));
    assert_eq!(rows.len(), 1023);
    let worst = rows
        .iter()
        .map(|r| (r[g].parse::<f64>().unwrap() - r[exact].parse::<f64>().unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn misspelled_key_fails_before_running() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("run.toml"), "command = \"coeffs\"\n[model]\ndim = 2\nnuu = 1.0\n").unwrap();
    let out = vicsek(tmp.path(), &["--config", "run.toml", "--out", "o", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nuu"));
    assert!(!tmp.path().join("o").exists());

    let out = vicsek(tmp.path(), &["--out", "o", "--set", "gci.kapa=2", "gci"]);
    assert_eq!(out.status.code(), Some(1));
    let out = vicsek(tmp.path(), &["--out", "o", "--set", "model.dim=1", "coeffs"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn manifest_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec!["--out", "a", "--set", "coeffs.rho.hi=4.0", "--set", "model.dim=2"];
    args.extend(QUADRATIC_NU);
    args.push("coeffs");
    assert!(vicsek(tmp.path(), &args).status.success());
    let out = vicsek(tmp.path(), &["--config", "a/manifest.toml", "--out", "b", "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["coeffs.csv", "coeffs.json"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let manifest = std::fs::read_to_string(tmp.path().join("b/manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"coeffs\""));
    assert!(manifest.contains("tool_version"));
}

#[test]
fn particle_runs_are_seeded() {
    let tmp = TempDir::new().unwrap();
    let common = ["--set", "simulate_particles.t_end=0.5", "--set", "seed=11", "simulate-particles"];
    for dir in ["a", "b"] {
        let mut args = vec!["--out", dir];
        args.extend(common);
        assert!(vicsek(tmp.path(), &args).status.success());
    }
    let a = std::fs::read(tmp.path().join("a/order.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/order.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn strict_turns_row_failures_into_exit_two() {
    let tmp = TempDir::new().unwrap();
    let bad = [
        "--set",
        "model.nu.law=affine",
        "--set",
        "model.nu.intercept=-1",
        "--set",
        "model.nu.slope=1",
        "coeffs",
    ];
    let mut args = vec!["--out", "lenient"];
    args.extend(bad);
    let out = vicsek(tmp.path(), &args);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let (header, rows) = read_csv(&tmp.path().join("lenient/coeffs.csv"));
    let c1 = column(&header, "c1");
    assert_eq!(rows[0][c1], "NaN");
    assert_ne!(rows[3][c1], "NaN");

    let mut args = vec!["--strict", "--out", "strict"];
    args.extend(bad);
    assert_eq!(vicsek(tmp.path(), &args).status.code(), Some(2));
}

#[test]
fn macro_halt_is_reported() {
    let tmp = TempDir::new().unwrap();
    let mut args = vec![
        "--out",
        "o",
        "--set",
        "simulate_macro.initial.rho0=3",
        "--set",
        "simulate_macro.t_end=0.05",
    ];
    args.extend(QUADRATIC_NU);
    args.push("simulate-macro");
    let out = vicsek(tmp.path(), &args);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("halted"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/macro_summary.json")).unwrap()).unwrap();
    assert!(!summary["halted"].is_null());

    args.insert(0, "--strict");
    assert_eq!(vicsek(tmp.path(), &args).status.code(), Some(2));
}
