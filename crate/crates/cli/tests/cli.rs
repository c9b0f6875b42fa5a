use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qcr_core::pipeline::{FitReport, Summary};
use qcr_core::rates::RATE_CSV_HEADER;
use serde_json::json;

fn qcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcr")).args(args).output().expect("qcr runs")
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn config() -> String {
    repo_path("configs/table1.json").display().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_json(path: &Path, value: &serde_json::Value) {
    fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        &["--help"][..],
        &["params", "--help"],
        &["params", "validate", "--help"],
        &["rates", "--help"],
        &["simulate", "--help"],
        &["extract", "--help"],
        &["sweep", "--help"],
        &["report", "--help"],
    ] {
        let out = qcr(cmd);
        assert_eq!(code(&out), 0, "{cmd:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{cmd:?}");
    }
}

#[test]
fn params_validate_prints_couplings() {
    let out = qcr(&["params", "validate", "--config", &config()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["rho"].as_f64().unwrap() > 0.0);
    assert!(v["fingerprint"].is_string());
}

#[test]
fn zero_bias_rate_row() {
    let out = qcr(&["rates", "--config", &config(), "--vgrid", "0:0:1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], RATE_CSV_HEADER);
    let gamma: f64 = lines[1].split(',').nth(4).unwrap().parse().unwrap();
    assert!(gamma > 0.55e5 && gamma < 2.2e5, "{gamma}");
}

#[test]
fn rates_are_deterministic() {
    let a = qcr(&["rates", "--config", &config()]);
    let b = qcr(&["rates", "--config", &config()]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 242);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qcr(&["rates", "--config", &config(), "--vgrid", "0:1:0"])), 2);
    assert_eq!(code(&qcr(&["rates", "--config", &config(), "--vgrid", "nonsense"])), 2);

    let bad = dir.path().join("bad.json");
    write_json(
        &bad,
        &json!({"device": {"R_T_kohm": -1.0, "T_N_K": 0.17, "gamma_D": 4e-4, "Z_r_ohm": 35.0,
            "C_c_fF": 840.0, "C_m_fF": 5.0, "f0_GHz": 8.683, "Delta_ueV": 215.0}}),
    );
    assert_eq!(code(&qcr(&["params", "validate", "--config", s(&bad)])), 2);
    assert_eq!(code(&qcr(&["rates", "--config", s(&bad)])), 2);
    assert_eq!(code(&qcr(&["rates"])), 2, "missing required flag");

    let spec = dir.path().join("spec.json");
    write_json(&spec, &json!({"voltage_fractions": [], "taus_ns": [10], "edges_ns": [1.25]}));
    let out = qcr(&["simulate", "--config", &config(), "--spec", s(&spec), "--out", s(&dir.path().join("t"))]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn missing_config_file_exits_1() {
    assert_eq!(code(&qcr(&["params", "validate", "--config", "/nonexistent/config.json"])), 1);
}

fn single_spec(dir: &Path) -> PathBuf {
    let spec = dir.join("single.json");
    write_json(
        &spec,
        &json!({"voltage_fractions": [0.8], "taus_ns": [12], "edges_ns": [1.25],
            "noise_sigma": 0.01, "n_avg": 10, "seed": 5}),
    );
    spec
}

#[test]
fn single_tuple_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = single_spec(dir.path());
    let out_dir = dir.path().join("traces");
    let out = qcr(&["simulate", "--config", &config(), "--spec", s(&spec), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = fs::read_to_string(out_dir.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    assert!(manifest.starts_with("V_p_uV,tau_ns,dt_edge_ns,file"));
    assert!(out_dir.join("trace_0000.csv").exists());
    assert!(out_dir.join("trace_0000.json").exists());
}

#[test]
fn fixed_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = single_spec(dir.path());
    let run = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        let out = qcr(&[
            "--jobs", "2", "simulate", "--config", &config(), "--spec", s(&spec), "--seed", seed, "--out", s(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read(out_dir.join("trace_0000.csv")).unwrap()
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a, run("c", "12"));
}

#[test]
fn flat_only_sweep_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // A QCR that never switches on: γ_QCR constant in bias.
    let rates = dir.path().join("flat_rates.csv");
    let mut csv = format!("{RATE_CSV_HEADER}\n");
    for (f, v) in [(0.0, 0.0), (0.65, 279.5), (1.3, 559.0)] {
        csv.push_str(&format!("{f},{v},1e5,0,1e5,0.1\n"));
    }
    fs::write(&rates, csv).unwrap();
    let spec = repo_path("configs/example_sweep.json");
    let traces = dir.path().join("traces");
    let out = qcr(&[
        "simulate", "--config", &config(), "--spec", s(&spec), "--rates", s(&rates), "--seed", "1", "--out",
        s(&traces),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = dir.path().join("fit.json");
    let out = qcr(&["extract", "--config", &config(), "--traces", s(&traces), "--out", s(&report)]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("insufficient linear region"), "{}", stderr(&out));
}

#[test]
fn example_sweep_is_flat_then_linear() {
    let dir = tempfile::tempdir().unwrap();
    let spec = repo_path("configs/example_sweep.json");
    let out = qcr(&["sweep", "--config", &config(), "--spec", s(&spec), "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fit = FitReport::from_path(&dir.path().join("fit_report.json")).unwrap();
    assert_eq!(fit.series.len(), 1);
    let series = &fit.series[0];
    let est = series.estimate.expect("fitted");
    let b = series.breakpoint_index.unwrap();
    assert!(b >= 2, "flat region present");
    let bp = est.breakpoint_tau_ns.unwrap();
    assert!((6.0..=10.0).contains(&bp), "breakpoint {bp}");
    let flat = &series.points[..b];
    let spread = flat.iter().map(|p| p.log_ratio).fold(f64::NEG_INFINITY, f64::max)
        - flat.iter().map(|p| p.log_ratio).fold(f64::INFINITY, f64::min);
    let last = series.points.last().unwrap().log_ratio;
    assert!(spread < 0.1 * (flat[0].log_ratio - last), "flat spread {spread}");
    assert!(est.gamma > 1e8 && est.gamma < 1.3e8, "{}", est.gamma);
    let points = fs::read_to_string(dir.path().join("fit_report.points.csv")).unwrap();
    assert_eq!(points.lines().count(), 38);
}

fn report_for(dir: &Path, fits: serde_json::Value) -> Summary {
    let fit_path = dir.join("reference_fit.json");
    write_json(&fit_path, &fits);
    let out_path = dir.join("summary.json");
    let out = qcr(&["report", "--config", &config(), "--fits", s(&fit_path), "--out", s(&out_path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    serde_json::from_str(&fs::read_to_string(out_path).unwrap()).unwrap()
}

fn estimate(gamma: f64, sigma: f64) -> serde_json::Value {
    json!({"V_p_uV": 400.0, "dt_edge_ns": 0.17, "points": [],
        "estimate": {"gamma": gamma, "sigma": sigma, "breakpoint_tau_ns": 8.0,
            "n_points_used": 20, "residual_rms": 0.0}})
}

#[test]
fn verbatim_reference_values_pass_tunability() {
    let dir = tempfile::tempdir().unwrap();
    let summary = report_for(
        dir.path(),
        json!({"format_version": 1, "t_b_ns": 10.0, "t_a_ns": 80.0, "gamma_off_per_s": 1.1e5,
            "gamma_x_fraction": 0.1,
            "pre_pulse": {"gamma_total": 1.32e7, "gamma_total_sigma": 1.1e6, "gamma_tr": 1.2e7,
                "gamma_tr_sigma": 1e6, "n_traces": 1},
            "series": [estimate(6.7e8, 0.7e8), estimate(1.6e7, 0.5e7)]}),
    );
    let t = summary.check("tunability").unwrap();
    assert!(t.pass);
    assert!((t.value - 55.833).abs() < 1e-3, "{}", t.value);
    assert!((t.sigma.unwrap() - 7.46).abs() < 0.01);
    for name in ["gamma_qcr_max", "gamma_qcr_min", "gamma_tr", "reset_total_ns"] {
        assert!(summary.check(name).unwrap().pass, "{name}");
    }
    let plateau = summary.check("reset_plateau_ns").unwrap().value;
    assert!((plateau - 6.873).abs() < 1e-3, "{plateau}");
}

#[test]
fn theory_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("summary.json");
    let out = qcr(&["report", "--config", &config(), "--out", s(&out_path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("on_off_theory_ratio"));
    let summary: Summary = serde_json::from_str(&fs::read_to_string(out_path).unwrap()).unwrap();
    let r = summary.check("on_off_theory_ratio").unwrap();
    assert!(r.pass);
    assert!((3.5..=4.5).contains(&r.value.log10()));
    assert!(summary.check("gamma_qcr_off_theory").unwrap().pass);
    assert!(summary.check("tunability").is_none());
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-6 * a.abs().max(b.abs())
}

// Set QCR_BLESS=1 to regenerate the checked-in summary.
#[test]
fn golden_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rates = d.join("rates.csv");
    let run = |args: &[&str]| {
        let out = qcr(args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    };
    run(&["rates", "--config", &config(), "--vgrid", "0:1.3:521", "--out", s(&rates)]);
    let mut fits = Vec::new();
    for name in ["golden_sweep", "high_bias_sweep"] {
        let traces = d.join(name);
        let spec = repo_path(&format!("configs/{name}.json"));
        run(&[
            "simulate", "--config", &config(), "--spec", s(&spec), "--rates", s(&rates), "--out", s(&traces),
        ]);
        let fit = d.join(format!("{name}.fit.json"));
        run(&["extract", "--config", &config(), "--traces", s(&traces), "--out", s(&fit)]);
        fits.push(fit);
    }
    let summary_path = d.join("summary.json");
    run(&[
        "report", "--config", &config(), "--fits", s(&fits[0]), s(&fits[1]), "--out", s(&summary_path),
    ]);
    let got: Summary = serde_json::from_str(&fs::read_to_string(&summary_path).unwrap()).unwrap();
    assert!(got.all_pass(), "{got:?}");

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/summary.json");
    if std::env::var_os("QCR_BLESS").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::copy(&summary_path, &golden).unwrap();
    }
    let want: Summary = serde_json::from_str(&fs::read_to_string(&golden).unwrap()).unwrap();
    assert_eq!(got.reference_version, want.reference_version);
    assert_eq!(got.device_fingerprint, want.device_fingerprint);
    assert_eq!(got.checks.len(), want.checks.len());
    for (g, w) in got.checks.iter().zip(&want.checks) {
        assert_eq!(g.name, w.name);
        assert_eq!(g.pass, w.pass, "{}", g.name);
        assert!(close(g.value, w.value), "{}: {} vs {}", g.name, g.value, w.value);
        match (g.sigma, w.sigma) {
            (Some(a), Some(b)) => assert!(close(a, b), "{} sigma: {a} vs {b}", g.name),
            (a, b) => assert_eq!(a, b, "{} sigma", g.name),
        }
    }
}
