//! QCR bias pulse with sine-squared edges, control-line distortion and the
//! experiment timeline.
//!
//! Time zero is the moment the resonator drive is switched off. The pulse
//! width `tau` includes both edges.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::constants::{NS, UV};
use crate::error::{Error, Result};
use crate::params::{short_hash, EnvironmentRates};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPulse {
    /// Plateau height, V.
    pub amplitude: f64,
    /// Total width including both edges, s.
    pub width: f64,
    /// Width of the sine-squared rise, s.
    pub rise: f64,
    /// Width of the sine-squared fall, s.
    pub fall: f64,
    /// Start of the rise, s.
    pub start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Before,
    Rise,
    Plateau,
    Fall,
    After,
}

impl BiasPulse {
    pub fn new(amplitude: f64, width: f64, rise: f64, fall: f64, start: f64) -> Result<Self> {
        let p = Self {
            amplitude,
            width,
            rise,
            fall,
            start,
        };
        p.validate()?;
        Ok(p)
    }

    /// A pulse with zero-width edges.
    pub fn rectangular(amplitude: f64, width: f64, start: f64) -> Result<Self> {
        Self::new(amplitude, width, 0.0, 0.0, start)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau", self.width),
            ("dt_rise", self.rise),
            ("dt_fall", self.fall),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "negative or non-finite"));
            }
        }
        if !self.amplitude.is_finite() || !self.start.is_finite() {
            return Err(Error::invalid("pulse", "non-finite"));
        }
        if self.width < self.rise + self.fall {
            return Err(Error::Precondition(format!(
                "pulse width {:.4} ns shorter than its edges ({:.4} + {:.4} ns)",
                self.width / NS,
                self.rise / NS,
                self.fall / NS
            )));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + self.width
    }

    /// Times where the waveform changes its functional form.
    pub fn breakpoints(&self) -> [f64; 4] {
        [
            self.start,
            self.start + self.rise,
            self.end() - self.fall,
            self.end(),
        ]
    }

    pub fn segment_at(&self, t: f64) -> Segment {
        let s = t - self.start;
        if s < 0.0 {
            Segment::Before
        } else if s < self.rise {
            Segment::Rise
        } else if s > self.width {
            Segment::After
        } else if s > self.width - self.fall {
            Segment::Fall
        } else {
            Segment::Plateau
        }
    }

    /// Evaluates the analytic form of `segment` at `t`, even at the segment's
    /// closed ends. Lets an integrator see one-sided limits at jumps.
    pub fn voltage_in(&self, t: f64, segment: Segment) -> f64 {
        match segment {
            Segment::Before | Segment::After => 0.0,
            Segment::Plateau => self.amplitude,
            Segment::Rise => {
                let x = ((t - self.start) / self.rise).clamp(0.0, 1.0);
                self.amplitude * (FRAC_PI_2 * x).sin().powi(2)
            }
            Segment::Fall => {
                let x = ((self.end() - t) / self.fall).clamp(0.0, 1.0);
                self.amplitude * (FRAC_PI_2 * x).sin().powi(2)
            }
        }
    }

    pub fn voltage(&self, t: f64) -> f64 {
        self.voltage_in(t, self.segment_at(t))
    }
}

pub fn pulse_voltage(t: f64, p: &BiasPulse) -> f64 {
    p.voltage(t)
}

/// Voltage sampled on a uniform time grid; linear between samples and held
/// constant beyond either end.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SampledWaveform {
    pub fn from_fn(t0: f64, t1: f64, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(dt > 0.0) || !(t1 >= t0) {
            return Err(Error::Precondition("sampling needs dt > 0 and t1 >= t0".into()));
        }
        let n = ((t1 - t0) / dt).round() as usize + 1;
        let values = (0..n).map(|i| f(t0 + dt * i as f64)).collect();
        Ok(Self { t0, dt, values })
    }

    pub fn from_pulse(p: &BiasPulse, t0: f64, t1: f64, dt: f64) -> Result<Self> {
        Self::from_fn(t0, t1, dt, |t| p.voltage(t))
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = (t - self.t0) / self.dt;
        if !(x > 0.0) {
            return self.values[0];
        }
        let i = x.floor() as usize;
        if i + 1 >= n {
            return self.values[n - 1];
        }
        let frac = x - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// Single-pole low-pass response of the control line: discrete exponential
/// smoothing with time constant `tau_c`, starting from the first sample.
/// `tau_c = 0` returns the input unchanged.
pub fn distort(waveform: &SampledWaveform, tau_c: f64) -> Result<SampledWaveform> {
    if !(tau_c >= 0.0) {
        return Err(Error::invalid("tau_c", "negative"));
    }
    if tau_c == 0.0 {
        return Ok(waveform.clone());
    }
    let alpha = -(-waveform.dt / tau_c).exp_m1();
    let mut state = waveform.values.first().copied().unwrap_or(0.0);
    let values = waveform
        .values
        .iter()
        .map(|&x| {
            state += alpha * (x - state);
            state
        })
        .collect();
    Ok(SampledWaveform {
        t0: waveform.t0,
        dt: waveform.dt,
        values,
    })
}

/// Full experiment schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timeline {
    pub pulse: BiasPulse,
    /// Analysis point before the pulse, s.
    pub t_b: f64,
    /// Analysis point after the pulse, s.
    pub t_a: f64,
    /// End of the recorded decay, s.
    pub t_end: f64,
    pub env: EnvironmentRates,
}

impl Timeline {
    pub fn new(pulse: BiasPulse, t_b: f64, t_a: f64, t_end: f64, env: EnvironmentRates) -> Result<Self> {
        let tl = Self {
            pulse,
            t_b,
            t_a,
            t_end,
            env,
        };
        tl.validate()?;
        Ok(tl)
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.env.validate()?;
        if !(self.t_b >= 0.0) {
            return Err(Error::Precondition("t_b must not precede the end of the drive".into()));
        }
        if !(self.t_b < self.pulse.start) {
            return Err(Error::Precondition("t_b must precede the pulse".into()));
        }
        if !(self.pulse.end() < self.t_a) {
            return Err(Error::Precondition("t_a must follow the pulse".into()));
        }
        if !(self.pulse.width < self.t_a - self.t_b) {
            return Err(Error::Precondition("pulse width must be below t_a - t_b".into()));
        }
        if !(self.t_end >= self.t_a) {
            return Err(Error::Precondition("t_end must not precede t_a".into()));
        }
        Ok(())
    }

    pub fn to_document(&self) -> TimelineDocument {
        TimelineDocument {
            t_b_ns: self.t_b / NS,
            t_a_ns: self.t_a / NS,
            t_end_ns: self.t_end / NS,
            pulse: PulseDocument {
                v_p_uv: self.pulse.amplitude / UV,
                tau_ns: self.pulse.width / NS,
                dt_rise_ns: self.pulse.rise / NS,
                dt_fall_ns: self.pulse.fall / NS,
                t_start_ns: self.pulse.start / NS,
            },
            environment: EnvironmentRatesDocument {
                gamma_tr_per_s: self.env.gamma_tr,
                gamma_x_fraction: self.env.gamma_x_fraction,
                gamma_qcr_off_per_s: self.env.gamma_qcr_off,
            },
        }
    }

    /// Short hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(&self.to_document()).expect("timeline serializes");
        short_hash(json.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseDocument {
    #[serde(rename = "V_p_uV")]
    pub v_p_uv: f64,
    pub tau_ns: f64,
    pub dt_rise_ns: f64,
    pub dt_fall_ns: f64,
    pub t_start_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentRatesDocument {
    pub gamma_tr_per_s: f64,
    pub gamma_x_fraction: f64,
    pub gamma_qcr_off_per_s: f64,
}

/// Timeline as exchanged in files: times in ns, voltages in uV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineDocument {
    pub t_b_ns: f64,
    pub t_a_ns: f64,
    pub t_end_ns: f64,
    pub pulse: PulseDocument,
    pub environment: EnvironmentRatesDocument,
}

impl TimelineDocument {
    pub fn to_timeline(&self) -> Result<Timeline> {
        let p = &self.pulse;
        let pulse = BiasPulse::new(
            p.v_p_uv * UV,
            p.tau_ns * NS,
            p.dt_rise_ns * NS,
            p.dt_fall_ns * NS,
            p.t_start_ns * NS,
        )?;
        let e = &self.environment;
        let env = EnvironmentRates::new(e.gamma_tr_per_s, e.gamma_x_fraction, e.gamma_qcr_off_per_s)?;
        Timeline::new(pulse, self.t_b_ns * NS, self.t_a_ns * NS, self.t_end_ns * NS, env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse() -> BiasPulse {
        BiasPulse::new(345.0 * UV, 20.0 * NS, 1.25 * NS, 1.25 * NS, 10.0 * NS).unwrap()
    }

    #[test]
    fn plateau_and_edges() {
        let p = pulse();
        assert_eq!(p.voltage(20.0 * NS), p.amplitude);
        let half = p.voltage(p.start + 0.5 * p.rise);
        assert!((half - 0.5 * p.amplitude).abs() < 1e-12 * p.amplitude);
        let half_fall = p.voltage(p.end() - 0.5 * p.fall);
        assert!((half_fall - 0.5 * p.amplitude).abs() < 1e-12 * p.amplitude);
        assert_eq!(p.voltage(p.start - 1e-12), 0.0);
        assert_eq!(p.voltage(p.end() + 1e-12), 0.0);
        assert!((p.amplitude - 345e-6).abs() < 1e-18);
    }

    #[test]
    fn waveform_is_continuous() {
        let p = pulse();
        for b in p.breakpoints() {
            let l = p.voltage(b - 1e-15);
            let r = p.voltage(b + 1e-15);
            assert!((l - r).abs() < 1e-9 * p.amplitude, "jump at {b:e}");
        }
    }

    #[test]
    fn rectangular_pulse_is_on_over_closed_interval() {
        let p = BiasPulse::rectangular(1.0, 5.0 * NS, 2.0 * NS).unwrap();
        assert_eq!(p.voltage(p.start), 1.0);
        assert_eq!(p.voltage(p.end()), 1.0);
        assert_eq!(p.voltage_in(p.end(), Segment::After), 0.0);
    }

    #[test]
    fn edges_must_fit_inside_width() {
        assert!(BiasPulse::new(1.0, 2.0 * NS, 1.25 * NS, 1.25 * NS, 0.0).is_err());
        assert!(BiasPulse::new(1.0, 2.5 * NS, 1.25 * NS, 1.25 * NS, 0.0).is_ok());
        assert!(BiasPulse::new(1.0, 2.5 * NS, -NS, 1.25 * NS, 0.0).is_err());
    }

    #[test]
    fn zero_time_constant_is_identity() {
        let w = SampledWaveform::from_pulse(&pulse(), 0.0, 40.0 * NS, 0.01 * NS).unwrap();
        assert_eq!(distort(&w, 0.0).unwrap(), w);
    }

    #[test]
    fn step_response_time_constant() {
        let dt = 0.01 * NS;
        let tau_c = 2.0 * NS;
        let step_at = 5.0 * NS;
        let w = SampledWaveform::from_fn(0.0, 20.0 * NS, dt, |t| if t >= step_at { 1.0 } else { 0.0 }).unwrap();
        let out = distort(&w, tau_c).unwrap();
        let target = 1.0 - (-1.0f64).exp();
        let idx = out.values.iter().position(|&v| v >= target).unwrap();
        let crossing = out.time(idx) - step_at;
        assert!((crossing - tau_c).abs() <= dt, "crossed at {:e}", crossing);
    }

    #[test]
    fn sampled_waveform_interpolates_and_holds() {
        let w = SampledWaveform {
            t0: 0.0,
            dt: 1.0,
            values: vec![0.0, 2.0, 4.0],
        };
        assert_eq!(w.value_at(0.5), 1.0);
        assert_eq!(w.value_at(-3.0), 0.0);
        assert_eq!(w.value_at(9.0), 4.0);
    }

    #[test]
    fn timeline_brackets_pulse() {
        let env = EnvironmentRates::new(1.2e7, 0.1, 1e5).unwrap();
        let p = pulse();
        assert!(Timeline::new(p, 5.0 * NS, 40.0 * NS, 60.0 * NS, env).is_ok());
        assert!(Timeline::new(p, 11.0 * NS, 40.0 * NS, 60.0 * NS, env).is_err());
        assert!(Timeline::new(p, 5.0 * NS, 29.0 * NS, 60.0 * NS, env).is_err());
        assert!(Timeline::new(p, 5.0 * NS, 40.0 * NS, 30.0 * NS, env).is_err());
    }

    #[test]
    fn timeline_document_round_trip() {
        let env = EnvironmentRates::new(1.2e7, 0.1, 1e5).unwrap();
        let tl = Timeline::new(pulse(), 5.0 * NS, 40.0 * NS, 60.0 * NS, env).unwrap();
        let doc = tl.to_document();
        let json = serde_json::to_string(&doc).unwrap();
        let back: TimelineDocument = serde_json::from_str(&json).unwrap();
        let tl2 = back.to_timeline().unwrap();
        assert!((tl2.pulse.width - tl.pulse.width).abs() < 1e-21);
        assert!((tl2.t_a - tl.t_a).abs() < 1e-21);
        assert_eq!(tl.fingerprint(), tl2.to_document().to_timeline().unwrap().fingerprint());
    }
}
