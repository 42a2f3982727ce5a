use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn charflow(args: &[&str], config: &str, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_charflow"))
        .args(args)
        .args(["--config", config, "--out"])
        .arg(out)
        .env_remove("CHARFLOW_THREADS")
        .output()
        .unwrap()
}

fn rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn column(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn evolve_slab_norm_is_nonincreasing() {
    let dir = tempfile::tempdir().unwrap();
    let out = charflow(&["evolve"], "slab1d", dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = rows(&dir.path().join("evolve.csv"));
    assert_eq!(header, "time,norm_p,trace_in_lp,trace_out_lp,green_residual");
    let norms = column(&rows, 1);
    assert_eq!(norms.len(), 7);
    assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{norms:?}");
    assert!((norms[0] - 0.5f64.sqrt()).abs() < 1e-12);
    // Every value is written with 17 significant digits.
    assert!(rows.iter().flatten().all(|v| v.trim_start_matches('-').split('e').next().unwrap().len() == 18));
}

#[test]
fn growth_bound_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gain2.toml");
    fs::write(&cfg, "preset = \"slab1d\"\n[boundary]\nkind = \"multiplicative\"\nalpha = 2.0\n[run]\ndelta = 0.99\n").unwrap();
    let out = charflow(&["growth-bound"], cfg.to_str().unwrap(), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = rows(&dir.path().join("growth_summary.csv"));
    assert_eq!(header, "A,C,delta,M,omega");
    let v = column(&rows, 3);
    assert!((v[0] - 4.0).abs() < 1e-12);
    let w = column(&rows, 4);
    assert!((w[0] - 2f64.ln() / 0.99).abs() < 1e-12);
    let (header, table) = self::rows(&dir.path().join("growth_bound.csv"));
    assert_eq!(header, "delta,truncated_norm,lower_bound_only");
    assert!(column(&table, 1).iter().all(|&c| c == 0.0));
}

#[test]
fn resolvent_reports_every_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let out = charflow(&["resolvent", "--threads", "2"], "slab1d", dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = rows(&dir.path().join("resolvent.csv"));
    assert_eq!(header, "lambda,terms,residual,rho");
    assert_eq!(column(&rows, 0), vec![1.0, 2.0, 5.0]);
    assert!(column(&rows, 2).iter().all(|&r| r < 1e-5));
    // Series ratio for a single slab loop is alpha * exp(-lambda).
    assert!((column(&rows, 3)[0] - 0.5 * (-1.0f64).exp()).abs() < 1e-12);
}

#[test]
fn verify_passes_on_slab_and_writes_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = charflow(&["verify", "--seed", "3"], "slab1d", dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let (header, rows) = rows(&dir.path().join("verify.csv"));
    assert_eq!(header, "name,residual,tolerance,passed");
    assert!(rows.iter().all(|r| r[3] != "false"));
    let jsonl = fs::read_to_string(dir.path().join("verify.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), rows.len());
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["name"].is_string() && v["passed"].is_boolean());
    }
}

#[test]
fn verify_fails_for_compressible_flow() {
    let dir = tempfile::tempdir().unwrap();
    let out = charflow(&["verify"], "linear1d", dir.path());
    assert!(!out.status.success());
    let (_, rows) = rows(&dir.path().join("verify.csv"));
    let inv = rows.iter().find(|r| r[0] == "measure_invariance").unwrap();
    assert_eq!(inv[3], "false");
    assert!(rows.iter().filter(|r| r[3] == "skipped").count() > 30);
}

#[test]
fn norms_table_has_both_sides() {
    let dir = tempfile::tempdir().unwrap();
    let out = charflow(&["norms"], "disk2d", dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = rows(&dir.path().join("norms.csv"));
    assert_eq!(header, "side,lp,y,ytilde");
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let v: Vec<f64> = r[1..].iter().map(|x| x.parse().unwrap()).collect();
        // Stay times on the unit disk are at most 2, so Y <= Lp <= Y~ for p = 2.
        assert!(v[1] <= v[0] + 1e-12 && v[0] <= v[2] + 1e-12, "{v:?}");
    }
}

#[test]
fn thread_count_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_charflow"))
        .args(["norms", "--config", "slab1d", "--out"])
        .arg(dir.path())
        .env("CHARFLOW_THREADS", "0")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("threads"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "preset = \"slab1d\"\n[run]\np = 1.0\n").unwrap();
    let out = charflow(&["evolve"], cfg.to_str().unwrap(), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.p"));
    let out = charflow(&["evolve"], "no-such-preset", dir.path());
    assert_eq!(out.status.code(), Some(2));
}
