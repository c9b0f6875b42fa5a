//! `qcr`: damping-rate theory, pulse-sweep simulation, extraction and
//! reference reports for a QCR-damped resonator.
//!
//! Exit codes: 0 success, 1 I/O or file-format error, 2 configuration error,
//! 3 numerical failure, 4 insufficient linear region in the extraction.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcr_core::pipeline::{
    environment, exit_code, extract_directory, report, simulate_sweep, theory_table, write_sweep, ExtractOptions,
    FitReport, SweepSpec,
};
use qcr_core::rates::{fraction_grid, rate_curve, DampingModel, QcrModel, RateCurve};
use qcr_core::{Config, Error, Result};

#[derive(Parser)]
#[command(name = "qcr", version, about = "QCR damping theory, pulse-sweep simulation and rate extraction")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Device parameter utilities.
    Params {
        #[command(subcommand)]
        action: ParamsAction,
    },
    /// Tabulate transition rates, damping and effective temperature over bias.
    Rates(RatesArgs),
    /// Simulate a pulse-width sweep into a trace directory.
    Simulate(SimulateArgs),
    /// Extract damping rates from a trace directory.
    Extract(ExtractArgs),
    /// Simulate and extract in one go.
    Sweep(SweepArgs),
    /// Compare theory and fit reports against the reference values.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum ParamsAction {
    /// Validate a configuration and print the derived couplings.
    Validate {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Bias grid `lo:hi:n` in units of 2Δ/e.
    #[arg(long, value_name = "a:b:n", default_value = "0:1.2:241")]
    vgrid: String,
    /// Output CSV (stdout when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepInputs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Sweep specification (JSON).
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,
    /// Overrides the seed of the sweep spec.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the control-line time constant of the sweep spec.
    #[arg(long = "tau-c", value_name = "NS")]
    tau_c: Option<f64>,
    /// Use a rate-curve CSV from `qcr rates` instead of computing the theory table.
    #[arg(long, value_name = "PATH")]
    rates: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    inputs: SweepInputs,
    /// Output directory for traces and manifest.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct Window {
    /// Analysis point before the pulse, ns.
    #[arg(long, value_name = "NS")]
    tb: Option<f64>,
    /// Analysis point after the pulse, ns.
    #[arg(long, value_name = "NS")]
    ta: Option<f64>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Trace directory written by `qcr simulate`.
    #[arg(long, value_name = "DIR")]
    traces: PathBuf,
    #[command(flatten)]
    window: Window,
    /// Fit report JSON; a `.points.csv` file is written next to it.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    inputs: SweepInputs,
    /// Output directory: traces/, fit_report.json, fit_report.points.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Fit reports to summarise; theory checks only when absent.
    #[arg(long = "fits", value_name = "PATH", num_args = 0..)]
    fits: Vec<PathBuf>,
    /// Summary JSON (printed table only when absent).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn parse_vgrid(s: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::Precondition(format!("--vgrid expects lo:hi:n, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(Error::Precondition("empty voltage grid".into()));
    }
    if n > 1 && !(hi > lo) {
        return Err(Error::Precondition("--vgrid needs hi > lo".into()));
    }
    Ok((lo, hi, n))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn params_validate(config: &Path) -> Result<()> {
    let cfg = Config::from_path(config)?;
    cfg.device.validate()?;
    let d = cfg.device.derive();
    let out = serde_json::json!({
        "fingerprint": cfg.device.fingerprint(),
        "alpha_c": d.alpha_c,
        "rho": d.rho,
        "photon_energy_ueV": d.photon_energy / qcr_core::constants::MICRO_EV,
        "R_K_ohm": d.r_k,
    });
    print!("{}", json(&out)?);
    Ok(())
}

fn rates(args: &RatesArgs) -> Result<()> {
    let cfg = Config::from_path(&args.config)?;
    let (lo, hi, n) = parse_vgrid(&args.vgrid)?;
    let curve = rate_curve(&fraction_grid(lo, hi, n, cfg.device.delta), &cfg.device)?;
    let csv = curve.to_csv();
    match &args.out {
        Some(p) => write_text(p, &csv),
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
            Ok(())
        }
    }
}

fn load_model(inputs: &SweepInputs, cfg: &Config) -> Result<Box<dyn DampingModel>> {
    Ok(match &inputs.rates {
        Some(p) => Box::new(RateCurve::from_csv(&fs::read_to_string(p)?)?.damping_table()?),
        None => Box::new(theory_table(&cfg.device)?),
    })
}

fn load_spec(inputs: &SweepInputs) -> Result<SweepSpec> {
    let mut spec = SweepSpec::from_path(&inputs.spec)?;
    if let Some(seed) = inputs.seed {
        spec.seed = seed;
    }
    if let Some(tc) = inputs.tau_c {
        spec.tau_c_ns = tc;
    }
    spec.validate()?;
    Ok(spec)
}

fn simulate_into(inputs: &SweepInputs, out: &Path) -> Result<(Config, SweepSpec)> {
    let cfg = Config::from_path(&inputs.config)?;
    let spec = load_spec(inputs)?;
    let model = load_model(inputs, &cfg)?;
    let traces = simulate_sweep(&spec, &cfg, model.as_ref())?;
    let rows = write_sweep(out, &traces)?;
    eprintln!("wrote {} traces to {}", rows.len(), out.display());
    Ok((cfg, spec))
}

fn extract_options(cfg: &Config, t_b_ns: f64, t_a_ns: f64) -> Result<ExtractOptions> {
    let model = QcrModel::new(&cfg.device)?;
    let env = environment(cfg, &model)?;
    Ok(ExtractOptions {
        t_b_ns,
        t_a_ns,
        gamma_off: env.gamma_qcr_off,
        gamma_x_fraction: env.gamma_x_fraction,
    })
}

fn write_fit_report(fit: &FitReport, out: &Path) -> Result<()> {
    write_text(out, &json(fit)?)?;
    write_text(&out.with_extension("points.csv"), &fit.points_csv())?;
    for s in &fit.series {
        match (&s.estimate, &s.error) {
            (Some(e), _) => eprintln!(
                "V_p = {:.1} uV, edges {} ns: gamma_QCR = {:.4e} +- {:.2e} 1/s, flat region to {:.2} ns",
                s.v_p_uv,
                s.dt_edge_ns,
                e.gamma,
                e.sigma,
                e.breakpoint_tau_ns.unwrap_or(f64::NAN)
            ),
            (None, Some(err)) => eprintln!("V_p = {:.1} uV, edges {} ns: {err}", s.v_p_uv, s.dt_edge_ns),
            _ => {}
        }
    }
    Ok(())
}

fn extract(args: &ExtractArgs) -> Result<()> {
    let cfg = Config::from_path(&args.config)?;
    let defaults = SweepSpec::single(1.0, vec![1.0], 0.0);
    let opts = extract_options(
        &cfg,
        args.window.tb.unwrap_or(defaults.t_b_ns),
        args.window.ta.unwrap_or(defaults.t_a_ns),
    )?;
    let fit = extract_directory(&args.traces, opts)?;
    write_fit_report(&fit, &args.out)
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let trace_dir = args.out.join("traces");
    let (cfg, spec) = simulate_into(&args.inputs, &trace_dir)?;
    let opts = extract_options(&cfg, spec.t_b_ns, spec.t_a_ns)?;
    let fit = extract_directory(&trace_dir, opts)?;
    write_fit_report(&fit, &args.out.join("fit_report.json"))
}

fn run_report(args: &ReportArgs) -> Result<()> {
    let cfg = Config::from_path(&args.config)?;
    let fits = args
        .fits
        .iter()
        .map(|p| FitReport::from_path(p))
        .collect::<Result<Vec<_>>>()?;
    let summary = report(&cfg, &fits)?;
    for c in &summary.checks {
        let sigma = c.sigma.map(|s| format!(" +- {s:.3e}")).unwrap_or_default();
        println!(
            "{:<22} {:>12.4e}{sigma:<14} {:<4}  {}",
            c.name,
            c.value,
            if c.pass { "PASS" } else { "FAIL" },
            c.reference
        );
    }
    if let Some(out) = &args.out {
        write_text(out, &json(&summary)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Precondition("--jobs must be positive".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Params {
            action: ParamsAction::Validate { config },
        } => params_validate(config),
        Command::Rates(a) => rates(a),
        Command::Simulate(a) => simulate_into(&a.inputs, &a.out).map(|_| ()),
        Command::Extract(a) => extract(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => run_report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()) as u8)
        }
    }
}
