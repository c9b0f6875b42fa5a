//! Sweep orchestration: simulate pulse-width sweeps to a trace directory,
//! extract damping rates from such a directory, and summarise fit reports
//! against the reference values.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, NS, UV};
use crate::dynamics::{evolve_amplitude, ControlVoltage, EvolveOptions};
use crate::error::{Error, ErrorKind, Result};
use crate::extraction::{
    detect_flat_region, fit_gamma_qcr, fit_linear_region, fit_pre_pulse, log_ratio_points, ratio_of, DampingEstimate,
    LineFit, SweepPoint,
};
use crate::params::{Config, DeviceParams, EnvironmentRates};
use crate::pulse::{BiasPulse, Timeline};
use crate::rates::{fraction_grid, rate_curve, DampingModel, DampingTable, QcrModel};
use crate::reference::{self, Measured};
use crate::trace::{read_trace, sample_trace_stream, write_trace, Trace};

/// Control-line time constant reproducing the observed flat region at
/// 0.8 x 2Δ with 1.25 ns edges; found with [`calibrate_tau_c`].
pub const DEFAULT_TAU_C_NS: f64 = 2.5;
/// Sampling step of the distorted control waveform.
pub const DISTORTION_STEP_NS: f64 = 0.01;
/// Upper end of the tabulated theory curve, in units of 2Δ/e.
pub const TABLE_FRACTION_MAX: f64 = 1.3;
pub const TABLE_POINTS: usize = 521;
/// Grid used for the theory on/off ratio.
pub const ON_OFF_GRID: (f64, f64, usize) = (0.0, 1.2, 241);

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const FIT_REPORT_VERSION: u32 = 1;

fn default_n_avg() -> u64 {
    1
}
fn default_tau_c() -> f64 {
    DEFAULT_TAU_C_NS
}
fn default_t_b() -> f64 {
    10.0
}
fn default_t_start() -> f64 {
    20.0
}
fn default_t_a() -> f64 {
    80.0
}
fn default_t_end() -> f64 {
    90.0
}
fn default_rate() -> f64 {
    10.0
}

/// Grid of pulse heights, widths and edge durations to simulate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Pulse heights as fractions of 2Δ/e.
    pub voltage_fractions: Vec<f64>,
    pub taus_ns: Vec<f64>,
    /// Rise and fall durations; each entry applies to both edges.
    pub edges_ns: Vec<f64>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_n_avg")]
    pub n_avg: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tau_c")]
    pub tau_c_ns: f64,
    #[serde(default = "default_t_b")]
    pub t_b_ns: f64,
    #[serde(default = "default_t_start")]
    pub t_start_ns: f64,
    #[serde(default = "default_t_a")]
    pub t_a_ns: f64,
    #[serde(default = "default_t_end")]
    pub t_end_ns: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_per_ns: f64,
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "empty"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(name, "unsorted"));
    }
    Ok(())
}

impl SweepSpec {
    /// A single pulse shape, noiseless, with default timing.
    pub fn single(fraction: f64, taus_ns: Vec<f64>, edge_ns: f64) -> Self {
        Self {
            voltage_fractions: vec![fraction],
            taus_ns,
            edges_ns: vec![edge_ns],
            noise_sigma: 0.0,
            n_avg: 1,
            seed: 0,
            tau_c_ns: DEFAULT_TAU_C_NS,
            t_b_ns: default_t_b(),
            t_start_ns: default_t_start(),
            t_a_ns: default_t_a(),
            t_end_ns: default_t_end(),
            sample_rate_per_ns: default_rate(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let spec: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_grid("voltage_fractions", &self.voltage_fractions)?;
        check_grid("taus_ns", &self.taus_ns)?;
        check_grid("edges_ns", &self.edges_ns)?;
        if self.voltage_fractions.iter().any(|&f| !(f > 0.0 && f <= TABLE_FRACTION_MAX)) {
            return Err(Error::invalid("voltage_fractions", "out-of-range (must be in (0, 1.3])"));
        }
        if self.taus_ns[0] <= 0.0 {
            return Err(Error::non_positive("taus_ns"));
        }
        if self.edges_ns[0] < 0.0 {
            return Err(Error::invalid("edges_ns", "negative"));
        }
        let widest_edges = 2.0 * self.edges_ns[self.edges_ns.len() - 1];
        if self.taus_ns[0] < widest_edges {
            return Err(Error::Precondition(format!(
                "tau = {} ns is shorter than rise + fall = {widest_edges} ns",
                self.taus_ns[0]
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma", "negative"));
        }
        if self.n_avg == 0 {
            return Err(Error::non_positive("n_avg"));
        }
        if !(self.tau_c_ns >= 0.0 && self.tau_c_ns.is_finite()) {
            return Err(Error::invalid("tau_c_ns", "negative"));
        }
        if !(self.sample_rate_per_ns > 0.0) {
            return Err(Error::non_positive("sample_rate_per_ns"));
        }
        let longest = self.taus_ns[self.taus_ns.len() - 1];
        if !(0.0 <= self.t_b_ns && self.t_b_ns < self.t_start_ns && self.t_start_ns + longest < self.t_a_ns) {
            return Err(Error::Precondition("need 0 <= t_b < t_start and t_start + tau < t_a".into()));
        }
        if !(self.t_end_ns >= self.t_a_ns) {
            return Err(Error::Precondition("t_end must not precede t_a".into()));
        }
        Ok(())
    }

    /// Every `(fraction, edge, tau)` combination, in simulation order.
    pub fn tuples(&self) -> Vec<SweepTuple> {
        let mut out = Vec::new();
        for &fraction in &self.voltage_fractions {
            for &edge_ns in &self.edges_ns {
                for &tau_ns in &self.taus_ns {
                    out.push(SweepTuple {
                        fraction,
                        tau_ns,
                        edge_ns,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTuple {
    pub fraction: f64,
    pub tau_ns: f64,
    pub edge_ns: f64,
}

/// Theory γ_QCR(V) tabulated on `[0, 1.3] x 2Δ/e`.
pub fn theory_table(device: &DeviceParams) -> Result<DampingTable> {
    rate_curve(&fraction_grid(0.0, TABLE_FRACTION_MAX, TABLE_POINTS, device.delta), device)?.damping_table()
}

/// Environment rates of `config`, taking the zero-bias damping from `model`
/// unless the configuration pins it.
pub fn environment(config: &Config, model: &dyn DampingModel) -> Result<EnvironmentRates> {
    let env = &config.environment;
    let off = match env.gamma_qcr_off_per_s {
        Some(v) => v,
        None => model.gamma_qcr(0.0)?,
    };
    EnvironmentRates::new(env.gamma_tr_per_s, env.gamma_x_fraction, off)
}

fn fraction_to_volts(device: &DeviceParams, fraction: f64) -> f64 {
    fraction * 2.0 * device.delta / ELEMENTARY_CHARGE
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrace {
    pub v_p_uv: f64,
    pub tau_ns: f64,
    pub edge_ns: f64,
    pub trace: Trace,
}

/// Simulates one trace; `stream` selects the random stream within the seed.
pub fn simulate_one(
    spec: &SweepSpec,
    device: &DeviceParams,
    env: EnvironmentRates,
    model: &dyn DampingModel,
    tuple: SweepTuple,
    stream: u64,
) -> Result<SimulatedTrace> {
    let volts = fraction_to_volts(device, tuple.fraction);
    let pulse = BiasPulse::new(
        volts,
        tuple.tau_ns * NS,
        tuple.edge_ns * NS,
        tuple.edge_ns * NS,
        spec.t_start_ns * NS,
    )?;
    let tl = Timeline::new(pulse, spec.t_b_ns * NS, spec.t_a_ns * NS, spec.t_end_ns * NS, env)?;
    let voltage = ControlVoltage::through_line(&pulse, spec.tau_c_ns * NS, DISTORTION_STEP_NS * NS, tl.t_end)?;
    let opts = EvolveOptions {
        output_step: NS / spec.sample_rate_per_ns,
        ..EvolveOptions::default()
    };
    let traj = evolve_amplitude(&tl, &voltage, model, opts)?;
    let trace = sample_trace_stream(
        &traj,
        spec.sample_rate_per_ns,
        spec.noise_sigma,
        spec.n_avg,
        spec.seed,
        stream,
    )?;
    Ok(SimulatedTrace {
        v_p_uv: volts / UV,
        tau_ns: tuple.tau_ns,
        edge_ns: tuple.edge_ns,
        trace,
    })
}

/// All traces of a sweep, in [`SweepSpec::tuples`] order. Trace `i` uses
/// random stream `i`.
pub fn simulate_sweep(spec: &SweepSpec, config: &Config, model: &dyn DampingModel) -> Result<Vec<SimulatedTrace>> {
    spec.validate()?;
    let env = environment(config, model)?;
    spec.tuples()
        .into_par_iter()
        .enumerate()
        .map(|(i, t)| simulate_one(spec, &config.device, env, model, t, i as u64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    #[serde(rename = "V_p_uV")]
    pub v_p_uv: f64,
    pub tau_ns: f64,
    pub dt_edge_ns: f64,
    pub file: String,
}

/// Writes every trace plus `manifest.csv` into `dir`.
pub fn write_sweep(dir: &Path, traces: &[SimulatedTrace]) -> Result<Vec<ManifestRow>> {
    fs::create_dir_all(dir)?;
    let rows: Vec<ManifestRow> = traces
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let file = format!("trace_{i:04}.csv");
            write_trace(&t.trace, &dir.join(&file))?;
            Ok(ManifestRow {
                v_p_uv: t.v_p_uv,
                tau_ns: t.tau_ns,
                dt_edge_ns: t.edge_ns,
                file,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = dir.join(MANIFEST_FILE);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&manifest)?));
    for r in &rows {
        w.serialize(r).map_err(|e| Error::MalformedCsv {
            path: manifest.clone(),
            reason: e.to_string(),
        })?;
    }
    w.flush()?;
    Ok(rows)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestRow>> {
    let path = dir.join(MANIFEST_FILE);
    let mut r = csv::Reader::from_reader(File::open(&path)?);
    r.deserialize()
        .collect::<std::result::Result<Vec<ManifestRow>, _>>()
        .map_err(|e| Error::MalformedCsv {
            path,
            reason: e.to_string(),
        })
}

/// Manifest rows and their traces.
pub fn read_sweep(dir: &Path) -> Result<Vec<(ManifestRow, Trace)>> {
    read_manifest(dir)?
        .into_par_iter()
        .map(|row| {
            let trace = read_trace(&dir.join(&row.file))?;
            Ok((row, trace))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub t_b_ns: f64,
    pub t_a_ns: f64,
    /// Added back to the slope-derived rate, 1/s.
    pub gamma_off: f64,
    pub gamma_x_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrePulseSummary {
    /// γ_tr + γ_x + γ_off from the pre-pulse decay, 1/s.
    pub gamma_total: f64,
    pub gamma_total_sigma: f64,
    pub gamma_tr: f64,
    pub gamma_tr_sigma: f64,
    pub n_traces: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    #[serde(rename = "V_p_uV")]
    pub v_p_uv: f64,
    pub dt_edge_ns: f64,
    pub points: Vec<SweepPoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub breakpoint_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<DampingEstimate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<LineFit>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub format_version: u32,
    pub t_b_ns: f64,
    pub t_a_ns: f64,
    pub gamma_off_per_s: f64,
    pub gamma_x_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pre_pulse: Option<PrePulseSummary>,
    pub series: Vec<SeriesFit>,
}

impl FitReport {
    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Plot-ready CSV of every sweep point with its fit residual.
    pub fn points_csv(&self) -> String {
        let mut out = String::from("V_p_uV,dt_edge_ns,tau_ns,log_ratio,sigma_y,residual\n");
        for s in &self.series {
            for (i, p) in s.points.iter().enumerate() {
                let residual = match (s.breakpoint_index, &s.fit) {
                    (Some(b), Some(f)) if i >= b => f.residuals[i - b].to_string(),
                    _ => String::new(),
                };
                let sigma = p.sigma_y.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{sigma},{residual}\n",
                    s.v_p_uv, s.dt_edge_ns, p.tau_ns, p.log_ratio
                ));
            }
        }
        out
    }
}

fn combine(estimates: &[DampingEstimate]) -> (f64, f64) {
    let n = estimates.len() as f64;
    if estimates.iter().all(|e| e.sigma > 0.0) {
        let w: f64 = estimates.iter().map(|e| e.sigma.powi(-2)).sum();
        let mean = estimates.iter().map(|e| e.gamma * e.sigma.powi(-2)).sum::<f64>() / w;
        (mean, w.powf(-0.5))
    } else {
        let mean = estimates.iter().map(|e| e.gamma).sum::<f64>() / n;
        let var = estimates.iter().map(|e| (e.gamma - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

/// Pre-pulse window: from the first sample to the pulse start.
fn pre_pulse_window(trace: &Trace, t_b_ns: f64) -> [f64; 2] {
    let end = trace.meta.schedule.map_or(t_b_ns, |s| s.pulse.t_start_ns);
    [trace.times_ns.first().copied().unwrap_or(0.0), end]
}

fn fit_series(v_p_uv: f64, dt_edge_ns: f64, mut points: Vec<SweepPoint>, gamma_off: f64) -> (SeriesFit, Option<Error>) {
    points.sort_by(|a, b| a.tau_ns.total_cmp(&b.tau_ns));
    let mut out = SeriesFit {
        v_p_uv,
        dt_edge_ns,
        points,
        breakpoint_index: None,
        estimate: None,
        fit: None,
        error: None,
    };
    let fitted = detect_flat_region(&out.points).and_then(|region| {
        let est = fit_gamma_qcr(&out.points, &region, gamma_off)?;
        let line = fit_linear_region(&out.points, &region)?;
        Ok((region, est, line))
    });
    match fitted {
        Ok((region, est, line)) => {
            out.breakpoint_index = Some(region.index);
            out.estimate = Some(est);
            out.fit = Some(line);
            (out, None)
        }
        Err(e) => {
            out.error = Some(e.to_string());
            (out, Some(e))
        }
    }
}

/// Groups traces by pulse height and edge duration and fits each series.
/// Fails only if no series could be fitted, with the first series' error.
pub fn extract_traces(traces: &[(ManifestRow, Trace)], opts: ExtractOptions) -> Result<FitReport> {
    if traces.is_empty() {
        return Err(Error::Precondition("no traces to extract".into()));
    }
    let pre: Vec<DampingEstimate> = traces
        .par_iter()
        .map(|(_, t)| fit_pre_pulse(t, pre_pulse_window(t, opts.t_b_ns)))
        .collect::<Result<_>>()?;
    let (total, total_sigma) = combine(&pre);
    let scale = 1.0 + opts.gamma_x_fraction;
    let pre_pulse = PrePulseSummary {
        gamma_total: total,
        gamma_total_sigma: total_sigma,
        // The pre-pulse decay includes the zero-bias QCR damping.
        gamma_tr: (total - opts.gamma_off) / scale,
        gamma_tr_sigma: total_sigma / scale,
        n_traces: pre.len(),
    };

    let mut groups: BTreeMap<(u64, u64), Vec<(f64, &Trace)>> = BTreeMap::new();
    let key = |r: &ManifestRow| (r.v_p_uv.to_bits(), r.dt_edge_ns.to_bits());
    for (row, trace) in traces {
        groups.entry(key(row)).or_default().push((row.tau_ns, trace));
    }
    let mut keyed: Vec<_> = groups.into_iter().collect();
    keyed.sort_by(|a, b| {
        let (va, ea) = (f64::from_bits(a.0 .0), f64::from_bits(a.0 .1));
        let (vb, eb) = (f64::from_bits(b.0 .0), f64::from_bits(b.0 .1));
        va.total_cmp(&vb).then(ea.total_cmp(&eb))
    });
    let fitted: Vec<(SeriesFit, Option<Error>)> = keyed
        .par_iter()
        .map(|((v, e), series)| {
            let points = log_ratio_points(series, opts.t_b_ns, opts.t_a_ns)?;
            Ok(fit_series(f64::from_bits(*v), f64::from_bits(*e), points, opts.gamma_off))
        })
        .collect::<Result<_>>()?;
    if fitted.iter().all(|(_, e)| e.is_some()) {
        let (_, err) = fitted.into_iter().next().expect("at least one series");
        return Err(err.expect("all series failed"));
    }
    Ok(FitReport {
        format_version: FIT_REPORT_VERSION,
        t_b_ns: opts.t_b_ns,
        t_a_ns: opts.t_a_ns,
        gamma_off_per_s: opts.gamma_off,
        gamma_x_fraction: opts.gamma_x_fraction,
        pre_pulse: Some(pre_pulse),
        series: fitted.into_iter().map(|(s, _)| s).collect(),
    })
}

pub fn extract_directory(dir: &Path, opts: ExtractOptions) -> Result<FitReport> {
    extract_traces(&read_sweep(dir)?, opts)
}

/// One line of the summary: a derived quantity and its reference check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    /// Human-readable acceptance rule.
    pub reference: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub reference_version: u32,
    pub device_fingerprint: String,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn measured_check(name: &str, value: f64, sigma: f64, r: Measured) -> Check {
    Check {
        name: name.into(),
        value,
        sigma: Some(sigma),
        reference: format!(
            "consistent with {:e} +- {:e} within {} combined sigma",
            r.value,
            r.sigma,
            reference::COMPARISON_SIGMAS
        ),
        pass: reference::consistent(value, sigma, r),
    }
}

/// Largest and smallest resolved (γ > 3σ) QCR estimates over all reports.
fn estimate_extremes(fits: &[FitReport]) -> Option<(DampingEstimate, DampingEstimate)> {
    let mut all: Vec<DampingEstimate> = fits
        .iter()
        .flat_map(|f| f.series.iter().filter_map(|s| s.estimate))
        .filter(|e| e.gamma > 3.0 * e.sigma && e.gamma > 0.0)
        .collect();
    all.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    Some((*all.last()?, *all.first()?))
}

/// Theory on/off ratio: max of γ_QCR over the standard grid over γ_QCR(0).
pub fn theory_on_off(device: &DeviceParams) -> Result<(f64, f64)> {
    let (lo, hi, n) = ON_OFF_GRID;
    let curve = rate_curve(&fraction_grid(lo, hi, n, device.delta), device)?;
    let off = QcrModel::new(device)?.damping(0.0)?;
    let max = curve.points.iter().fold(0.0_f64, |m, p| m.max(p.gamma_qcr));
    Ok((off, max))
}

/// Photon-number reset time at damping `gamma`: plateau time to reach the
/// reset fraction, plus both example edges and the observed flat region.
pub fn reset_time_ns(gamma: f64) -> (f64, f64) {
    let plateau = (1.0 / reference::RESET_PHOTON_FRACTION).ln() / gamma / NS;
    (
        plateau,
        plateau + 2.0 * reference::EXAMPLE_EDGE_NS + reference::FLAT_REGION_NS,
    )
}

/// Compares theory and any number of fit reports against the reference values.
pub fn report(config: &Config, fits: &[FitReport]) -> Result<Summary> {
    let device = &config.device;
    let mut checks = Vec::new();

    let (off, max) = theory_on_off(device)?;
    let band = reference::GAMMA_QCR_OFF_FACTOR;
    checks.push(Check {
        name: "gamma_qcr_off_theory".into(),
        value: off,
        sigma: None,
        reference: format!("within a factor {band} of {:e}", reference::GAMMA_QCR_OFF_THEORY),
        pass: off >= reference::GAMMA_QCR_OFF_THEORY / band && off <= reference::GAMMA_QCR_OFF_THEORY * band,
    });
    let decades = (max / off).log10();
    let (lo, hi) = reference::ON_OFF_DECADES;
    checks.push(Check {
        name: "on_off_theory_ratio".into(),
        value: max / off,
        sigma: None,
        reference: format!("between 10^{lo} and 10^{hi}"),
        pass: (lo..=hi).contains(&decades),
    });

    let extremes = estimate_extremes(fits);
    if let Some((g_max, g_min)) = extremes {
        checks.push(measured_check("gamma_qcr_max", g_max.gamma, g_max.sigma, reference::GAMMA_QCR_MAX));
        checks.push(measured_check("gamma_qcr_min", g_min.gamma, g_min.sigma, reference::GAMMA_QCR_MIN));
    }

    let pre: Vec<PrePulseSummary> = fits.iter().filter_map(|f| f.pre_pulse).collect();
    let gamma_tr = (!pre.is_empty()).then(|| {
        let as_est: Vec<DampingEstimate> = pre
            .iter()
            .map(|p| DampingEstimate {
                gamma: p.gamma_tr,
                sigma: p.gamma_tr_sigma,
                breakpoint_tau_ns: None,
                n_points_used: p.n_traces,
                residual_rms: 0.0,
            })
            .collect();
        combine(&as_est)
    });
    if let Some((tr, tr_sigma)) = gamma_tr {
        checks.push(measured_check("gamma_tr", tr, tr_sigma, reference::GAMMA_TR));
    }
    if let (Some((g_max, _)), Some((tr, tr_sigma))) = (extremes, gamma_tr) {
        let r = ratio_of(g_max.gamma, g_max.sigma, tr, tr_sigma)?;
        checks.push(measured_check("tunability", r.value, r.sigma, reference::TUNABILITY));
    }

    let example_volts = fraction_to_volts(device, reference::EXAMPLE_PULSE_FRACTION) / UV;
    let example = fits.iter().flat_map(|f| &f.series).find(|s| {
        (s.v_p_uv - example_volts).abs() <= 1e-6 * example_volts
            && (s.dt_edge_ns - reference::EXAMPLE_EDGE_NS).abs() < 1e-9
    });
    if let Some(bp) = example.and_then(|s| s.estimate).and_then(|e| e.breakpoint_tau_ns) {
        checks.push(Check {
            name: "flat_region_ns".into(),
            value: bp,
            sigma: None,
            reference: format!(
                "{} +- {} ns",
                reference::FLAT_REGION_NS,
                reference::FLAT_REGION_TOLERANCE_NS
            ),
            pass: (bp - reference::FLAT_REGION_NS).abs() <= reference::FLAT_REGION_TOLERANCE_NS,
        });
    }

    let reset_gamma = extremes.map_or(max, |(g, _)| g.gamma);
    let (plateau, total) = reset_time_ns(reset_gamma);
    checks.push(Check {
        name: "reset_plateau_ns".into(),
        value: plateau,
        sigma: None,
        reference: format!("ln(1/{})/gamma", reference::RESET_PHOTON_FRACTION),
        pass: plateau.is_finite() && plateau > 0.0,
    });
    checks.push(Check {
        name: "reset_total_ns".into(),
        value: total,
        sigma: None,
        reference: format!("below {} ns including edges and flat region", reference::RESET_BUDGET_NS),
        pass: total < reference::RESET_BUDGET_NS,
    });

    Ok(Summary {
        reference_version: reference::REFERENCE_VERSION,
        device_fingerprint: device.fingerprint(),
        checks,
    })
}

/// Detected end of the flat region for a noiseless sweep at one pulse shape.
pub fn flat_region_ns(
    config: &Config,
    model: &dyn DampingModel,
    tau_c_ns: f64,
    fraction: f64,
    edge_ns: f64,
    taus_ns: Vec<f64>,
) -> Result<f64> {
    let spec = SweepSpec {
        tau_c_ns,
        ..SweepSpec::single(fraction, taus_ns, edge_ns)
    };
    let traces = simulate_sweep(&spec, config, model)?;
    let series: Vec<(f64, &Trace)> = traces.iter().map(|t| (t.tau_ns, &t.trace)).collect();
    let points = log_ratio_points(&series, spec.t_b_ns, spec.t_a_ns)?;
    Ok(detect_flat_region(&points)?.breakpoint_tau_ns)
}

/// Width grid of the example sweep, ns.
pub fn example_taus_ns() -> Vec<f64> {
    (4..=40).map(f64::from).collect()
}

/// Flat-region width at the example pulse shape for each candidate `tau_c`.
pub fn calibrate_tau_c(config: &Config, model: &dyn DampingModel, candidates_ns: &[f64]) -> Result<Vec<(f64, f64)>> {
    candidates_ns
        .iter()
        .map(|&tc| {
            let bp = flat_region_ns(
                config,
                model,
                tc,
                reference::EXAMPLE_PULSE_FRACTION,
                reference::EXAMPLE_EDGE_NS,
                example_taus_ns(),
            )?;
            Ok((tc, bp))
        })
        .collect()
}

/// Maps a failure class to the CLI exit code.
pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::InsufficientLinearRegion => 4,
    }
}
