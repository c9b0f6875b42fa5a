//! Resonator field amplitude under time-dependent total damping,
//! `dA/dt = -γ_tot(t) A / 2`, plus the closed-form log-ratio model used on
//! the analysis side.

use crate::error::{Error, Result};
use crate::pulse::{distort, BiasPulse, SampledWaveform, Segment, Timeline};
use crate::quad::{integrate, QuadOptions};
use crate::rates::DampingModel;

/// Upper bound on fixed RK4 steps per trajectory.
const MAX_STEPS: usize = 50_000_000;

/// Voltage actually seen by the QCR.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlVoltage {
    /// The nominal pulse shape, undistorted.
    Ideal(BiasPulse),
    /// A sampled waveform, typically the distorted pulse.
    Sampled(SampledWaveform),
    /// Piecewise-constant levels: `levels[i]` holds between `times[i-1]` and `times[i]`.
    Steps { times: Vec<f64>, levels: Vec<f64> },
}

impl ControlVoltage {
    /// The nominal pulse passed through the control line. `tau_c = 0` keeps
    /// the exact analytic pulse.
    pub fn through_line(pulse: &BiasPulse, tau_c: f64, dt: f64, t_end: f64) -> Result<Self> {
        if tau_c == 0.0 {
            return Ok(Self::Ideal(*pulse));
        }
        let sampled = SampledWaveform::from_pulse(pulse, 0.0, t_end, dt)?;
        Ok(Self::Sampled(distort(&sampled, tau_c)?))
    }

    pub fn steps(times: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != times.len() + 1 {
            return Err(Error::Precondition("step schedule needs one more level than breakpoints".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("step breakpoints must increase strictly".into()));
        }
        Ok(Self::Steps { times, levels })
    }

    pub fn voltage(&self, t: f64) -> f64 {
        match self {
            Self::Ideal(p) => p.voltage(t),
            Self::Sampled(w) => w.value_at(t),
            Self::Steps { times, levels } => levels[times.partition_point(|&b| b <= t)],
        }
    }

    /// Voltage at `t` using the smooth piece that covers the open interval
    /// `(lo, hi)`; at a jump this yields the one-sided limit from inside.
    fn voltage_within(&self, t: f64, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        match self {
            Self::Ideal(p) => p.voltage_in(t, p.segment_at(mid)),
            Self::Sampled(w) => w.value_at(t),
            Self::Steps { .. } => self.voltage(mid),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Ideal(p) => p.breakpoints().to_vec(),
            Self::Sampled(_) => Vec::new(),
            Self::Steps { times, .. } => times.clone(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Self::Ideal(p) => p.amplitude.abs(),
            Self::Sampled(w) => w.values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Self::Steps { levels, .. } => levels.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

/// γ_tot(t) = γ_tr + γ_x + γ_QCR(V(t)).
pub fn total_damping(t: f64, tl: &Timeline, voltage: &ControlVoltage, model: &dyn DampingModel) -> Result<f64> {
    Ok(tl.env.background() + model.gamma_qcr(voltage.voltage(t))?)
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Spacing of the recorded samples, s.
    pub output_step: f64,
    /// The RK4 step is the shortest time scale divided by this.
    pub steps_per_scale: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            output_step: 0.1e-9,
            steps_per_scale: 20.0,
        }
    }
}

/// A(t) on a uniform grid starting at the end of the drive, A(0) = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// γ_tot at each recorded time, 1/s.
    pub gamma_total: Vec<f64>,
    pub timeline: Timeline,
}

impl AmplitudeTrajectory {
    /// Linear interpolation between recorded samples.
    pub fn amplitude_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return Some(self.amplitude[0]);
        }
        if i >= n {
            return Some(self.amplitude[n - 1]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let s = (t - t0) / (t1 - t0);
        Some(self.amplitude[i - 1] + s * (self.amplitude[i] - self.amplitude[i - 1]))
    }
}

/// Integrates the amplitude with classical RK4. Steps never straddle a
/// waveform breakpoint or an output sample, so piecewise-constant damping is
/// integrated to the order of the method.
pub fn evolve_amplitude(
    tl: &Timeline,
    voltage: &ControlVoltage,
    model: &dyn DampingModel,
    opts: EvolveOptions,
) -> Result<AmplitudeTrajectory> {
    tl.validate()?;
    if !(opts.output_step > 0.0) || !(opts.steps_per_scale >= 1.0) {
        return Err(Error::Precondition("output step and steps per scale must be positive".into()));
    }
    let background = tl.env.background();
    let gamma_max = background + model.max_on(voltage.max_abs())?;
    let mut scale = 1.0 / gamma_max;
    for s in [tl.pulse.rise, tl.pulse.fall] {
        if s > 0.0 {
            scale = scale.min(s);
        }
    }
    let mut h_max = (scale / opts.steps_per_scale).min(opts.output_step);
    if let ControlVoltage::Sampled(w) = voltage {
        h_max = h_max.min(w.dt);
    }
    if !(h_max > 0.0) || !h_max.is_finite() || tl.t_end / h_max > MAX_STEPS as f64 {
        return Err(Error::StepUnderflow(format!(
            "step {h_max:e} s over {:e} s",
            tl.t_end
        )));
    }

    let n_out = (tl.t_end / opts.output_step).floor() as usize + 1;
    let out_time = |k: usize| opts.output_step * k as f64;
    let mut events: Vec<(f64, Option<usize>)> = (0..n_out).map(|k| (out_time(k), Some(k))).collect();
    for b in voltage.breakpoints() {
        if b > 0.0 && b < tl.t_end {
            events.push((b, None));
        }
    }
    if out_time(n_out - 1) < tl.t_end {
        events.push((tl.t_end, None));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.is_some().cmp(&a.1.is_some())));

    let gamma_at = |t: f64, lo: f64, hi: f64| -> Result<f64> {
        Ok(background + model.gamma_qcr(voltage.voltage_within(t, lo, hi))?)
    };

    let mut times = Vec::with_capacity(n_out);
    let mut amplitude = Vec::with_capacity(n_out);
    let mut gamma_total = Vec::with_capacity(n_out);
    let mut a = 1.0;
    let mut t_prev = 0.0;
    for &(t_event, out) in &events {
        let span = t_event - t_prev;
        if span > 0.0 {
            let m = (span / h_max).ceil().max(1.0) as usize;
            let h = span / m as f64;
            let (lo, hi) = (t_prev, t_event);
            let mut g0 = gamma_at(lo, lo, hi)?;
            for i in 0..m {
                let t = lo + h * i as f64;
                let t1 = if i + 1 == m { hi } else { t + h };
                let gm = gamma_at(t + 0.5 * h, lo, hi)?;
                let g1 = gamma_at(t1, lo, hi)?;
                let k1 = -0.5 * g0 * a;
                let k2 = -0.5 * gm * (a + 0.5 * h * k1);
                let k3 = -0.5 * gm * (a + 0.5 * h * k2);
                let k4 = -0.5 * g1 * (a + h * k3);
                a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                g0 = g1;
            }
            t_prev = t_event;
        }
        if let Some(k) = out {
            if times.len() == k {
                times.push(t_event);
                amplitude.push(a);
                gamma_total.push(total_damping(t_event, tl, voltage, model)?);
            }
        }
    }
    Ok(AmplitudeTrajectory {
        times,
        amplitude,
        gamma_total,
        timeline: *tl,
    })
}

/// Damping rates entering the closed-form log-ratio model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRates {
    /// γ_QCR on the plateau, 1/s.
    pub gamma_qcr: f64,
    /// Effective γ_QCR during the rise and fall, 1/s.
    pub gamma_edge: f64,
}

/// ln(A(t_a)/A(t_b)) predicted by the piecewise model:
/// `-½[γ_QCR (τ - Δt_r - Δt_f) + (γ_tr + γ_x)(t_a - t_b) + γ_edge (Δt_r + Δt_f) + γ_off (t_a - t_b - τ)]`.
pub fn predicted_log_ratio(tl: &Timeline, rates: PulseRates) -> Result<f64> {
    let window = tl.t_a - tl.t_b;
    let p = &tl.pulse;
    if !(p.width < window) {
        return Err(Error::Precondition("pulse width must be below t_a - t_b".into()));
    }
    let edges = p.rise + p.fall;
    Ok(-0.5
        * (rates.gamma_qcr * (p.width - edges)
            + tl.env.background() * window
            + rates.gamma_edge * edges
            + tl.env.gamma_qcr_off * (window - p.width)))
}

/// Time average of γ_QCR(V(t)) over the two sine-squared edges. For
/// zero-width edges this is γ_QCR at the plateau height.
pub fn edge_average(pulse: &BiasPulse, model: &dyn DampingModel) -> Result<f64> {
    let edges = pulse.rise + pulse.fall;
    if edges == 0.0 {
        return model.gamma_qcr(pulse.amplitude);
    }
    let opts = QuadOptions {
        rel_tol: 1e-10,
        abs_tol: 0.0,
        max_panels: 5_000,
    };
    let mut total = 0.0;
    for (segment, lo, hi) in [
        (Segment::Rise, pulse.start, pulse.start + pulse.rise),
        (Segment::Fall, pulse.end() - pulse.fall, pulse.end()),
    ] {
        if hi > lo {
            let err = std::cell::Cell::new(None);
            let r = integrate(
                |t| match model.gamma_qcr(pulse.voltage_in(t, segment)) {
                    Ok(g) => g,
                    Err(e) => {
                        err.set(Some(e));
                        0.0
                    }
                },
                &[lo, hi],
                opts,
            )?;
            if let Some(e) = err.into_inner() {
                return Err(e);
            }
            total += r.value;
        }
    }
    Ok(total / edges)
}
