//! Exact SI defining constants (2019 redefinition) and unit helpers.
//!
//! Every module reads physical constants from here; nothing else hardcodes them.

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Resistance quantum h/e^2, ohm.
pub const RESISTANCE_QUANTUM: f64 = PLANCK / (ELEMENTARY_CHARGE * ELEMENTARY_CHARGE);

pub const MICRO_EV: f64 = 1e-6 * ELEMENTARY_CHARGE;
pub const NS: f64 = 1e-9;
pub const UV: f64 = 1e-6;
pub const GHZ: f64 = 1e9;
pub const FEMTOFARAD: f64 = 1e-15;
pub const KILOOHM: f64 = 1e3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resistance_quantum_matches_codata() {
        assert!((RESISTANCE_QUANTUM - 25_812.807_45).abs() < 1e-4);
    }
}
