//! Oracles shared by the integration tests.
#![allow(dead_code)]

use qcr_core::constants::PLANCK;
use qcr_core::tunneling::{dynes_dos, fermi, WINDOW_GAPS};
use qcr_core::DeviceParams;

/// Straight trapezoid sum of the defining integral on `n` uniform points,
/// evaluated directly in SI units.
pub fn trapezoid_forward_rate(energy: f64, p: &DeviceParams, n: usize) -> f64 {
    let half = (WINDOW_GAPS * p.delta) + energy.abs();
    let h = 2.0 * half / (n - 1) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        let eps = -half + h * i as f64;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sum += w * dynes_dos(eps, p.delta, p.gamma_d) * fermi(eps - energy, p.t_n) * fermi(-eps, p.t_n);
    }
    sum * h / PLANCK
}

/// ln A(t) for A(0) = 1 under piecewise-constant damping: `rates[i]` holds
/// on `[edges[i-1], edges[i])`, with `edges` implicitly starting at 0.
pub fn piecewise_log_amplitude(edges: &[f64], rates: &[f64], t: f64) -> f64 {
    assert_eq!(rates.len(), edges.len() + 1);
    let mut lo = 0.0;
    let mut integral = 0.0;
    for (i, &g) in rates.iter().enumerate() {
        let hi = edges.get(i).copied().unwrap_or(f64::INFINITY).min(t);
        if hi > lo {
            integral += g * (hi - lo);
            lo = hi;
        }
    }
    -0.5 * integral
}
