use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn critscale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critscale"))
        .args(args)
        .env_remove("CRITSCALE_MAX_SITES")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn compute_product_state() {
    let out = critscale(&["compute", "--model", "harmonic", "--alpha", "0", "--blocks", "4", "--ell", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    assert!(doc["entanglement"]["total_E_bits"].as_f64().unwrap().abs() < 1e-9);
    assert!(doc.get("wall_seconds").is_none());
}

#[test]
fn compute_critical_harmonic_is_renormalized() {
    let out = critscale(&["compute", "--model", "harmonic", "--alpha", "1", "--blocks", "10", "--ell", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    assert_eq!(doc["entanglement"]["renormalized"], Value::Bool(true));
    assert_eq!(doc["entanglement"]["xi"], Value::String("inf".into()));
    assert_eq!(doc["entanglement"]["E_div_bits"], Value::Null);
    assert_eq!(doc["solver"]["converged"], Value::Bool(true));
}

#[test]
fn compute_timing_is_opt_in() {
    let out = critscale(&["compute", "--model", "harmonic", "--alpha", "0.5", "--blocks", "2", "--ell", "4", "--timing"]);
    assert!(json_stdout(&out)["wall_seconds"].as_f64().is_some());
}

#[test]
fn gapless_grid_is_a_config_error() {
    let out = critscale(&["compute", "--model", "xy", "--gamma", "0", "--lambda", "0", "--blocks", "4", "--ell", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("gapless"));
}

#[test]
fn config_errors_name_the_field() {
    for (args, field) in [
        (vec!["--model", "harmonic", "--alpha", "2", "--ell", "4"], "alpha"),
        (vec!["--model", "xy", "--gamma", "1", "--ell", "4"], "lambda"),
        (vec!["--model", "harmonic", "--alpha", "0.5", "--ell", "8,4"], "ell"),
        (vec!["--model", "harmonic", "--alpha", "0.5", "--ell", "4", "--tol", "0"], "tol"),
        (vec!["--model", "harmonic", "--alpha", "0.5", "--ell", "4", "--workers", "0"], "workers"),
        (vec!["--model", "harmonic", "--alpha", "0.5", "--ell", "4,8"], "ell"),
        (vec!["--alpha", "0.5", "--ell", "4"], "model"),
    ] {
        let mut full = vec!["compute"];
        full.extend(args);
        let out = critscale(&full);
        assert_eq!(out.status.code(), Some(2), "{full:?}");
        assert!(stderr(&out).contains(field), "{full:?}: {}", stderr(&out));
    }
    assert_eq!(critscale(&["compute", "--bogus"]).status.code(), Some(2));
}

#[test]
fn site_cap_comes_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_critscale"))
        .args(["compute", "--model", "harmonic", "--alpha", "0.5", "--blocks", "4", "--ell", "16"])
        .env("CRITSCALE_MAX_SITES", "32")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ell"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"model": "harmonic", "alpha": 0.0, "blocks": 3, "ell": [4]}"#).unwrap();
    let path = cfg.to_str().unwrap();
    let base = json_stdout(&critscale(&["compute", "--config", path]));
    assert_eq!(base["N"], 3);
    assert_eq!(base["spec"]["alpha"], 0.0);
    let over = json_stdout(&critscale(&["compute", "--config", path, "--alpha", "0.5", "--blocks", "2"]));
    assert_eq!(over["N"], 2);
    assert_eq!(over["spec"]["alpha"], 0.5);

    std::fs::write(&cfg, r#"{"model": "harmonic", "alpha": 0.5, "colour": 1}"#).unwrap();
    assert_eq!(critscale(&["compute", "--config", path, "--ell", "4"]).status.code(), Some(2));
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn product_sweep_has_zero_density() {
    let out = critscale(&["sweep", "--model", "harmonic", "--alpha", "0", "--blocks", "3", "--ell", "2..16:x2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 4 * 4);
    for r in &rows {
        assert_eq!(r.len(), 14);
        assert_eq!(r[9], "0");
    }
}

#[test]
fn sweep_output_is_byte_identical() {
    let args = ["sweep", "--model", "xy", "--gamma", "1", "--lambda", "1", "--boundary", "antiperiodic", "--blocks", "4", "--ell", "4..32:x2"];
    let first = critscale(&args);
    let second = critscale(&args);
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "2"]);
    let third = critscale(&with_workers);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.stdout, third.stdout);
}

#[test]
fn unconverged_sweep_still_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = critscale(&[
        "sweep", "--model", "harmonic", "--alpha", "0.9", "--blocks", "4", "--ell", "4,8", "--max-iter", "2", "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let rows = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[11] == "false"));
}

#[test]
fn plot_script_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let plot = dir.path().join("s.gp");
    let out = critscale(&[
        "sweep", "--model", "harmonic", "--alpha", "0.5", "--blocks", "2", "--ell", "2,4",
        "--out", csv.to_str().unwrap(), "--plot-script", plot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let script = std::fs::read_to_string(plot).unwrap();
    assert!(script.contains(csv.to_str().unwrap()));
}

const HEADER: &str = "model,params,N,ell,sector_m,nu,E_eta_bits,E_eta_renormalized_flag,total_E_bits,density_bits,delta_density_bits,converged,iterations,residual";

/// Sector energies whose forward slopes follow κ + (a0 + a2(ν−½)²)ℓ_mid^(−ρ).
fn synthetic_csv(path: &Path, kappa: f64, rho: f64, a0: f64, a2: f64, nus: &[f64], ells: &[usize]) {
    let mut text = format!("{HEADER}\n");
    let mut values = vec![0.0f64; nus.len()];
    for (i, &ell) in ells.iter().enumerate() {
        if i > 0 {
            let prev = ells[i - 1] as f64;
            let mid = (prev * ell as f64).sqrt();
            let dlog = (ell as f64 / prev).log2();
            for (v, &nu) in values.iter_mut().zip(nus) {
                *v += dlog * (kappa + (a0 + a2 * (nu - 0.5f64).powi(2)) * mid.powf(-rho));
            }
        }
        for (m, (&nu, &v)) in nus.iter().zip(&values).enumerate() {
            text.push_str(&format!("xy,gamma=1;lambda=1,{},{ell},{m},{nu},{v:.17e},false,0,0,0,true,1,0\n", nus.len()));
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn fit_recovers_synthetic_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("syn.csv");
    let nus = [0.05, 0.15, 0.3, 0.5, 0.7, 0.85];
    synthetic_csv(&csv, 1.0 / 12.0, 1.0, 0.1, 0.2, &nus, &[4, 8, 16, 32, 64, 128]);
    let out = critscale(&["fit", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json_stdout(&out);
    let close = |key: &str, want: f64| {
        let got = doc[key].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-8 * want.abs(), "{key}: {got} vs {want}");
    };
    close("kappa_star", 1.0 / 12.0);
    close("rho", 1.0);
    close("a0", 0.1);
    close("a2", 0.2);
    close("c_star", 1.0);
}

#[test]
fn fit_failures_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("short.csv");
    synthetic_csv(&csv, 0.1, 1.0, 0.1, 0.2, &[0.1, 0.3, 0.5], &[4, 8]);
    assert_eq!(critscale(&["fit", csv.to_str().unwrap()]).status.code(), Some(4));
    synthetic_csv(&csv, 0.1, 1.0, 0.1, 0.2, &[0.5, 0.5, 0.5], &[4, 8, 16, 32]);
    assert_eq!(critscale(&["fit", csv.to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(critscale(&["fit", "/nonexistent/sweep.csv"]).status.code(), Some(2));
}

#[test]
fn sweep_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ising.csv");
    let out = critscale(&[
        "sweep", "--model", "xy", "--gamma", "1", "--lambda", "1", "--boundary", "antiperiodic", "--blocks", "6",
        "--ell", "4..64:x2", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let fit = critscale(&["fit", csv.to_str().unwrap()]);
    assert_eq!(fit.status.code(), Some(0));
    let kappa = json_stdout(&fit)["kappa_star"].as_f64().unwrap();
    assert!(kappa > 0.03 && kappa < 0.06, "{kappa}");
}

#[test]
fn oracle_checks_pass() {
    for args in [
        vec!["--model", "xy", "--gamma", "1", "--lambda", "1", "--boundary", "antiperiodic", "--ell", "4"],
        vec!["--model", "harmonic", "--alpha", "0.99", "--ell", "32"],
        vec!["--model", "harmonic", "--alpha", "0", "--ell", "4,8"],
    ] {
        let mut full = vec!["oracle-check", "--blocks", "2"];
        full.extend(args);
        let out = critscale(&full);
        assert_eq!(out.status.code(), Some(0), "{full:?}: {}", stderr(&out));
        assert_eq!(json_stdout(&out)["pass"], Value::Bool(true));
    }
}

#[test]
fn oracle_mismatch_exits_five() {
    // a loose tolerance stops the solver far from the optimum
    let out = critscale(&[
        "oracle-check", "--model", "harmonic", "--alpha", "0.99", "--blocks", "2", "--ell", "16", "--tol", "0.9",
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(json_stdout(&out)["pass"], Value::Bool(false));
}

#[test]
fn oracle_rejects_unsupported_runs() {
    let more_blocks = critscale(&["oracle-check", "--model", "harmonic", "--alpha", "0.5", "--blocks", "3", "--ell", "4"]);
    assert_eq!(more_blocks.status.code(), Some(2));
    let critical = critscale(&["oracle-check", "--model", "harmonic", "--alpha", "1", "--blocks", "2", "--ell", "4"]);
    assert_eq!(critical.status.code(), Some(2));
}
