//! Single-junction NIS tunneling kernel.
//!
//! `F(E) = (1/h) ∫ dε n_S(ε) f(ε - E) [1 - f(ε)]` is the rate at which an
//! electron tunnels while the environment supplies energy `E`, with a
//! Dynes-broadened BCS density of states on the superconducting side and a
//! single electron temperature for both electrodes.

use num_complex::Complex64;

use crate::constants::{BOLTZMANN, PLANCK};
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions, QuadResult};

/// Half-width of the integration window in units of the gap, before widening by |E|.
pub const WINDOW_GAPS: f64 = 40.0;
/// Largest |E| accepted by [`forward_rate`], in units of the gap.
pub const MAX_ENERGY_GAPS: f64 = 20.0;

/// Parameters entering the tunneling kernel; a view of the device parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunnelKernelParams {
    pub delta: f64,
    pub gamma_d: f64,
    pub t_n: f64,
    pub r_t: f64,
}

/// Dynes density of states `|Re[(ε/Δ + iγ) / sqrt((ε/Δ + iγ)² - 1)]|`.
pub fn dynes_dos(eps: f64, delta: f64, gamma_d: f64) -> f64 {
    dynes_dos_reduced(eps / delta, gamma_d)
}

#[inline]
fn dynes_dos_reduced(x: f64, gamma_d: f64) -> f64 {
    let z = Complex64::new(x, gamma_d);
    (z / (z * z - 1.0).sqrt()).re.abs()
}

/// Fermi-Dirac occupation, stable for arbitrarily large |ε|/(k_B T).
pub fn fermi(eps: f64, t: f64) -> f64 {
    fermi_reduced(eps / (BOLTZMANN * t))
}

#[inline]
fn fermi_reduced(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Density of states on the superconducting side of the junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityOfStates {
    #[default]
    Dynes,
    /// Constant unit density; turns the junction into a normal tunnel junction.
    Normal,
}

/// A rate together with the quadrature's relative error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    /// 1/s
    pub value: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TunnelKernel {
    pub params: TunnelKernelParams,
    pub dos: DensityOfStates,
    pub quad: QuadOptions,
}

impl TunnelKernel {
    pub fn new(params: TunnelKernelParams) -> Self {
        Self {
            params,
            dos: DensityOfStates::Dynes,
            quad: QuadOptions::default(),
        }
    }

    pub fn with_dos(mut self, dos: DensityOfStates) -> Self {
        self.dos = dos;
        self
    }

    pub fn with_quad(mut self, quad: QuadOptions) -> Self {
        self.quad = quad;
        self
    }

    /// Integrand of F in reduced units `x = ε/Δ`, `e = E/Δ`.
    pub fn integrand(&self, e_reduced: f64) -> impl Fn(f64) -> f64 + '_ {
        let beta = self.params.delta / (BOLTZMANN * self.params.t_n);
        let gamma_d = self.params.gamma_d;
        let dos = self.dos;
        move |x| {
            let n = match dos {
                DensityOfStates::Dynes => dynes_dos_reduced(x, gamma_d),
                DensityOfStates::Normal => 1.0,
            };
            n * fermi_reduced((x - e_reduced) * beta) * fermi_reduced(-x * beta)
        }
    }

    /// Integration window `[-L, L]` in reduced units with `L = 40 + |E|/Δ`.
    pub fn window(&self, energy: f64) -> f64 {
        WINDOW_GAPS + (energy / self.params.delta).abs()
    }

    fn breakpoints(&self, e_reduced: f64, half_width: f64) -> Vec<f64> {
        let peak = 50.0 * self.params.gamma_d;
        let mut pts = vec![-half_width, half_width, 0.0, e_reduced];
        for edge in [-1.0, 1.0] {
            pts.extend([edge - peak, edge, edge + peak]);
        }
        pts.retain(|p| p.abs() <= half_width);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// F(E) in 1/s.
    pub fn forward_rate(&self, energy: f64) -> Result<RateEstimate> {
        let delta = self.params.delta;
        if !(energy.abs() <= MAX_ENERGY_GAPS * delta) {
            return Err(Error::Precondition(format!(
                "|E| = {:.3} Delta exceeds {MAX_ENERGY_GAPS} Delta",
                energy.abs() / delta
            )));
        }
        let e_reduced = energy / delta;
        let half_width = self.window(energy);
        let pts = self.breakpoints(e_reduced, half_width);
        let QuadResult { value, error, .. } = integrate(self.integrand(e_reduced), &pts, self.quad)?;
        let scale = delta / PLANCK;
        Ok(RateEstimate {
            value: value * scale,
            rel_error: if value > 0.0 { error / value } else { 0.0 },
        })
    }
}

/// F(E) for the Dynes kernel with default quadrature settings.
pub fn forward_rate(energy: f64, k: &TunnelKernelParams) -> Result<RateEstimate> {
    TunnelKernel::new(*k).forward_rate(energy)
}
