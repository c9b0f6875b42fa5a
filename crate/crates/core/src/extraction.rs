//! Damping-rate extraction from amplitude traces: exponential fit of the
//! pre-pulse decay, log-ratio sweep over pulse width, flat-region detection
//! and the slope fit.

use serde::{Deserialize, Serialize};

use crate::constants::NS;
use crate::error::{Error, Result};
use crate::trace::Trace;

const MIN_PRE_PULSE_SAMPLES: usize = 10;
const MIN_SWEEP_POINTS: usize = 6;
const MIN_LINEAR_POINTS: usize = 3;
/// Slope significance, in standard errors, for a sweep to count as decaying.
const SLOPE_SIGNIFICANCE: f64 = 3.0;

/// Straight-line least-squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Covariance of (intercept, slope).
    pub covariance: [[f64; 2]; 2],
    /// Weighted sum of squared residuals (plain SSE when unweighted).
    pub chi2: f64,
    pub residuals: Vec<f64>,
    pub weighted: bool,
}

impl LineFit {
    pub fn slope_sigma(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }

    pub fn residual_rms(&self) -> f64 {
        let n = self.residuals.len() as f64;
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt()
    }
}

/// Weighted least squares with weights `1/sigma²`. Without sigmas the
/// covariance is scaled by the residual variance.
pub fn fit_line(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<LineFit> {
    let n = x.len();
    if y.len() != n || sigma.is_some_and(|s| s.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 || (sigma.is_none() && n < 3) {
        return Err(Error::SingularFit(format!("{n} points")));
    }
    let weights: Vec<f64> = match sigma {
        Some(s) => {
            if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::invalid("sigma_y", "non-positive"));
            }
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        None => vec![1.0; n],
    };
    // Centre x for conditioning.
    let sw: f64 = weights.iter().sum();
    let xm = x.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / sw;
    let ym = y.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - xm;
        sxx += weights[i] * dx * dx;
        sxy += weights[i] * dx * (y[i] - ym);
    }
    let spread = x.iter().fold(0.0_f64, |m, v| m.max((v - xm).abs()));
    if !(sxx > 0.0) || spread <= 1e-12 * xm.abs() {
        return Err(Error::SingularFit("all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let chi2: f64 = residuals.iter().zip(&weights).map(|(r, w)| w * r * r).sum();

    let var_slope = 1.0 / sxx;
    let var_mean = 1.0 / sw;
    let mut cov = [
        [var_mean + xm * xm * var_slope, -xm * var_slope],
        [-xm * var_slope, var_slope],
    ];
    if sigma.is_none() {
        let s2 = chi2 / (n - 2) as f64;
        for row in &mut cov {
            for c in row {
                *c *= s2;
            }
        }
    }
    Ok(LineFit {
        intercept,
        slope,
        covariance: cov,
        chi2,
        residuals,
        weighted: sigma.is_some(),
    })
}

/// A damping rate with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingEstimate {
    /// 1/s.
    pub gamma: f64,
    /// 1/s.
    pub sigma: f64,
    /// End of the flat region, ns; absent for pre-pulse fits.
    pub breakpoint_tau_ns: Option<f64>,
    pub n_points_used: usize,
    pub residual_rms: f64,
}

/// Fits `ln A = c - g t / 2` to the samples in `window_ns` and returns
/// g = γ_tr + γ_x + γ_off.
pub fn fit_pre_pulse(trace: &Trace, window_ns: [f64; 2]) -> Result<DampingEstimate> {
    let [t0, t1] = window_ns;
    if !(t1 > t0) {
        return Err(Error::Precondition("empty pre-pulse window".into()));
    }
    if let Some(s) = &trace.meta.schedule {
        if t1 > s.pulse.t_start_ns {
            return Err(Error::Precondition(format!(
                "pre-pulse window ends at {t1} ns, after the pulse starts at {} ns",
                s.pulse.t_start_ns
            )));
        }
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut sig = Vec::new();
    let sample_sigma = trace.meta.sample_sigma();
    for (&t, &a) in trace.times_ns.iter().zip(&trace.amplitudes) {
        if t < t0 || t > t1 {
            continue;
        }
        if !(a > 0.0) {
            return Err(Error::Precondition(format!("non-positive amplitude {a} at {t} ns")));
        }
        x.push(t);
        y.push(a.ln());
        if let Some(s) = sample_sigma {
            sig.push(s / a);
        }
    }
    if x.len() < MIN_PRE_PULSE_SAMPLES {
        return Err(Error::Precondition(format!(
            "{} samples in the pre-pulse window, need {MIN_PRE_PULSE_SAMPLES}",
            x.len()
        )));
    }
    let fit = fit_line(&x, &y, sample_sigma.map(|_| sig.as_slice()))?;
    Ok(DampingEstimate {
        gamma: -2.0 * fit.slope / NS,
        sigma: 2.0 * fit.slope_sigma() / NS,
        breakpoint_tau_ns: None,
        n_points_used: x.len(),
        residual_rms: fit.residual_rms(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau_ns: f64,
    /// ln(A(t_a) / A(t_b)).
    pub log_ratio: f64,
    /// Absent when the trace carries no noise model.
    pub sigma_y: Option<f64>,
}

fn sample_near(trace: &Trace, t_ns: f64, what: &str) -> Result<f64> {
    let period = trace
        .period_ns()
        .ok_or_else(|| Error::Precondition("trace has fewer than two samples".into()))?;
    let i = trace.times_ns.partition_point(|&t| t < t_ns);
    let best = [i.saturating_sub(1), i.min(trace.len() - 1)]
        .into_iter()
        .min_by(|&a, &b| (trace.times_ns[a] - t_ns).abs().total_cmp(&(trace.times_ns[b] - t_ns).abs()))
        .expect("two candidates");
    if (trace.times_ns[best] - t_ns).abs() > 0.5 * period * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!("no sample within half a period of {what} = {t_ns} ns")));
    }
    Ok(trace.amplitudes[best])
}

/// One [`SweepPoint`] per `(tau_ns, trace)` pair, in input order.
pub fn log_ratio_points(series: &[(f64, &Trace)], t_b_ns: f64, t_a_ns: f64) -> Result<Vec<SweepPoint>> {
    if !(t_a_ns > t_b_ns) {
        return Err(Error::Precondition("t_a must follow t_b".into()));
    }
    series
        .iter()
        .enumerate()
        .map(|(i, &(tau, trace))| {
            if !(tau >= 0.0 && tau < t_a_ns - t_b_ns) {
                return Err(Error::Precondition(format!(
                    "sweep point {i}: tau = {tau} ns is not below t_a - t_b = {} ns",
                    t_a_ns - t_b_ns
                )));
            }
            let a_b = sample_near(trace, t_b_ns, "t_b")?;
            let a_a = sample_near(trace, t_a_ns, "t_a")?;
            if !(a_a > 0.0 && a_b > 0.0) {
                return Err(Error::Precondition(format!("sweep point {i}: non-positive amplitude at t_b or t_a")));
            }
            let sigma_y = trace.meta.sample_sigma().map(|s| (s / a_a).hypot(s / a_b));
            Ok(SweepPoint {
                tau_ns: tau,
                log_ratio: (a_a / a_b).ln(),
                sigma_y,
            })
        })
        .collect()
}

fn sigmas(points: &[SweepPoint]) -> Option<Vec<f64>> {
    points.iter().map(|p| p.sigma_y).collect()
}

/// Result of the flat-region scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatRegion {
    /// Number of leading points assigned to the flat part.
    pub index: usize,
    /// Where the constant level meets the fitted line, ns.
    pub breakpoint_tau_ns: f64,
}

/// Exhaustive scan over `b` leading flat points, minimizing the total
/// (weighted) SSE of a constant on the first `b` points and a line on the
/// rest. Ties go to the smallest `b`.
pub fn detect_flat_region(points: &[SweepPoint]) -> Result<FlatRegion> {
    let n = points.len();
    if n < MIN_SWEEP_POINTS {
        return Err(Error::InsufficientLinearRegion(format!(
            "{n} sweep points, need at least {MIN_SWEEP_POINTS}"
        )));
    }
    if points.windows(2).any(|w| !(w[1].tau_ns > w[0].tau_ns)) {
        return Err(Error::Precondition("sweep points must be sorted by increasing tau".into()));
    }
    let sig = sigmas(points);
    let w: Vec<f64> = match &sig {
        Some(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; n],
    };
    let x: Vec<f64> = points.iter().map(|p| p.tau_ns).collect();
    let y: Vec<f64> = points.iter().map(|p| p.log_ratio).collect();

    let total_ss = {
        let sw: f64 = w.iter().sum();
        let m = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
        y.iter().zip(&w).map(|(a, b)| b * (a - m).powi(2)).sum::<f64>()
    };
    let tie = 1e-10 * total_ss + f64::MIN_POSITIVE;

    let constant_sse = |b: usize| -> (f64, f64) {
        if b == 0 {
            return (0.0, 0.0);
        }
        let sw: f64 = w[..b].iter().sum();
        let m = y[..b].iter().zip(&w[..b]).map(|(a, c)| a * c).sum::<f64>() / sw;
        (m, y[..b].iter().zip(&w[..b]).map(|(a, c)| c * (a - m).powi(2)).sum())
    };

    let mut best: Option<(usize, f64)> = None;
    for b in 0..=n - MIN_LINEAR_POINTS {
        let line = fit_line(&x[b..], &y[b..], Some(&w[b..].iter().map(|v| v.powf(-0.5)).collect::<Vec<_>>()))?;
        let sse = constant_sse(b).1 + line.chi2;
        if best.is_none_or(|(_, s)| sse < s - tie) {
            best = Some((b, sse));
        }
    }
    let (b, _) = best.expect("scan visits at least one split");
    let line = fit_linear_region_at(points, b, sig.as_deref())?;
    check_decaying(&line, &x[b..])?;
    let breakpoint_tau_ns = if b == 0 {
        x[0]
    } else {
        let (level, _) = constant_sse(b);
        ((level - line.intercept) / line.slope).clamp(x[b - 1], x[b])
    };
    Ok(FlatRegion {
        index: b,
        breakpoint_tau_ns,
    })
}

fn fit_linear_region_at(points: &[SweepPoint], b: usize, sig: Option<&[f64]>) -> Result<LineFit> {
    if points.len() < b + MIN_LINEAR_POINTS {
        return Err(Error::InsufficientLinearRegion(format!(
            "{} points after the flat region, need {MIN_LINEAR_POINTS}",
            points.len().saturating_sub(b)
        )));
    }
    let x: Vec<f64> = points[b..].iter().map(|p| p.tau_ns).collect();
    let y: Vec<f64> = points[b..].iter().map(|p| p.log_ratio).collect();
    fit_line(&x, &y, sig.map(|s| &s[b..]))
}

fn check_decaying(line: &LineFit, x: &[f64]) -> Result<()> {
    let span = x[x.len() - 1] - x[0];
    let scale = line.intercept.abs().max(1.0);
    if line.slope * span >= -(SLOPE_SIGNIFICANCE * line.slope_sigma() * span + 1e-12 * scale) {
        return Err(Error::InsufficientLinearRegion(format!(
            "no significant decrease of the log ratio (slope {:.3e} +- {:.3e} per ns)",
            line.slope,
            line.slope_sigma()
        )));
    }
    Ok(())
}

/// Linear fit on the points beyond the flat region.
pub fn fit_linear_region(points: &[SweepPoint], region: &FlatRegion) -> Result<LineFit> {
    fit_linear_region_at(points, region.index, sigmas(points).as_deref())
}

/// γ_QCR from the slope of the linear region. The slope measures
/// γ_QCR - γ_off since the pulse replaces the zero-bias damping for its
/// duration, so `gamma_off` is added back.
pub fn fit_gamma_qcr(points: &[SweepPoint], region: &FlatRegion, gamma_off: f64) -> Result<DampingEstimate> {
    let line = fit_linear_region(points, region)?;
    Ok(DampingEstimate {
        gamma: -2.0 * line.slope / NS + gamma_off,
        sigma: 2.0 * line.slope_sigma() / NS,
        breakpoint_tau_ns: Some(region.breakpoint_tau_ns),
        n_points_used: points.len() - region.index,
        residual_rms: line.residual_rms(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub sigma: f64,
    /// Set when the denominator is within 3σ of zero.
    pub denominator_poorly_resolved: bool,
}

/// num/den with first-order error propagation.
pub fn tunability_ratio(num: &DampingEstimate, den: &DampingEstimate) -> Result<Ratio> {
    ratio_of(num.gamma, num.sigma, den.gamma, den.sigma)
}

pub fn ratio_of(num: f64, num_sigma: f64, den: f64, den_sigma: f64) -> Result<Ratio> {
    if !(den > 0.0) {
        return Err(Error::Precondition(format!("ratio denominator {den} is not positive")));
    }
    let value = num / den;
    let rel = if num == 0.0 {
        0.0
    } else {
        (num_sigma / num).hypot(den_sigma / den)
    };
    let sigma = if num == 0.0 { num_sigma / den } else { value.abs() * rel };
    Ok(Ratio {
        value,
        sigma,
        denominator_poorly_resolved: den <= 3.0 * den_sigma,
    })
}
