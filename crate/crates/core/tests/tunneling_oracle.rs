//! Independent checks of the tunneling kernel: a dense trapezoid rule on a
//! uniform grid, high-precision reference values, and the detailed-balance
//! identity.

mod common;

use common::trapezoid_forward_rate;
use qcr_core::constants::{BOLTZMANN, PLANCK};
use qcr_core::tunneling::{dynes_dos, TunnelKernel};
use qcr_core::DeviceParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernel() -> TunnelKernel {
    TunnelKernel::new(DeviceParams::table_one().kernel())
}

#[test]
fn zero_energy_matches_dense_trapezoid() {
    let p = DeviceParams::table_one();
    let oracle = trapezoid_forward_rate(0.0, &p, 1_000_000);
    let f = kernel().forward_rate(0.0).unwrap().value;
    assert!(((f - oracle) / oracle).abs() < 1e-6, "{f:e} vs {oracle:e}");
}

#[test]
fn random_energies_match_dense_trapezoid() {
    let p = DeviceParams::table_one();
    let k = kernel();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let e = rng.random_range(-3.0..3.0) * p.delta;
        let oracle = trapezoid_forward_rate(e, &p, 1_000_000);
        let f = k.forward_rate(e).unwrap().value;
        assert!(((f - oracle) / oracle).abs() < 1e-6, "E = {e:e}: {f:e} vs {oracle:e}");
    }
}

#[test]
fn matches_high_precision_reference_values() {
    // 30-digit tanh-sinh evaluation of the same integral, split at ±Δ, 0 and E
    let p = DeviceParams::table_one();
    let photon = PLANCK * p.f0;
    let k = kernel();
    let cases = [
        (0.0, 1_467_373.893_227_66),
        (photon, 4_052_033.147_015_58),
        (-photon, 349_215.798_088_413),
        (p.delta, 10_649_189_435.330_7),
        (1.2 * p.delta, 32_964_479_670.265),
    ];
    for (e, golden) in cases {
        let f = k.forward_rate(e).unwrap().value;
        assert!(((f - golden) / golden).abs() < 1e-8, "E = {e:e}: {f} vs {golden}");
    }
}

#[test]
fn detailed_balance_for_random_energies() {
    let p = DeviceParams::table_one();
    let k = kernel();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let e = rng.random_range(0.0..3.0) * p.delta;
        let fwd = k.forward_rate(e).unwrap().value;
        let back = k.forward_rate(-e).unwrap().value;
        let expected = (-e / (BOLTZMANN * p.t_n)).exp();
        assert!(((back / fwd - expected) / expected).abs() < 1e-6);
    }
}

#[test]
fn forward_rate_is_monotone() {
    let p = DeviceParams::table_one();
    let k = kernel();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let a = rng.random_range(-4.0..4.0) * p.delta;
        let b = rng.random_range(-4.0..4.0) * p.delta;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let f_lo = k.forward_rate(lo).unwrap().value;
        let f_hi = k.forward_rate(hi).unwrap().value;
        assert!(f_lo <= f_hi * (1.0 + 1e-9), "F({lo:e}) = {f_lo:e} > F({hi:e}) = {f_hi:e}");
    }
}

#[test]
fn dos_evenness_and_floor_on_dense_sample() {
    let p = DeviceParams::table_one();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10_000 {
        let eps = rng.random_range(-10.0..10.0) * p.delta;
        let a = dynes_dos(eps, p.delta, p.gamma_d);
        let b = dynes_dos(-eps, p.delta, p.gamma_d);
        assert!((a - b).abs() <= 1e-13 * a.max(1.0));
        assert!(a >= p.gamma_d / 2.0);
    }
}
