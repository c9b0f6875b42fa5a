//! Published reference values for the characterized device, with the
//! tolerances the report and acceptance checks apply to them.
//!
//! Bump [`REFERENCE_VERSION`] whenever a value or tolerance changes.

pub const REFERENCE_VERSION: u32 = 1;

/// A measured value with its 1-sigma uncertainty, in 1/s unless noted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

/// Largest measured QCR damping rate.
pub const GAMMA_QCR_MAX: Measured = Measured {
    value: 6.7e8,
    sigma: 0.7e8,
};

/// Smallest measured QCR damping rate.
pub const GAMMA_QCR_MIN: Measured = Measured {
    value: 1.6e7,
    sigma: 0.5e7,
};

/// Damping rate into the transmission line.
pub const GAMMA_TR: Measured = Measured {
    value: 1.2e7,
    sigma: 0.1e7,
};

/// Theoretical zero-bias QCR damping rate.
pub const GAMMA_QCR_OFF_THEORY: f64 = 1.1e5;
/// Accepted multiplicative band around [`GAMMA_QCR_OFF_THEORY`].
pub const GAMMA_QCR_OFF_FACTOR: f64 = 2.0;

/// Total-damping tunability, max QCR rate over transmission-line rate.
pub const TUNABILITY: Measured = Measured {
    value: 56.0,
    sigma: 8.0,
};

/// Accepted decades of on/off theory ratio.
pub const ON_OFF_DECADES: (f64, f64) = (3.5, 4.5);

/// Excess damping as a fraction of the transmission-line rate.
pub const GAMMA_X_FRACTION: f64 = 0.10;

/// Observed width of the flat region at 0.8 x 2Delta, 1.25 ns edges.
pub const FLAT_REGION_NS: f64 = 8.0;
pub const FLAT_REGION_TOLERANCE_NS: f64 = 2.0;

/// Photon-number fraction regarded as reset.
pub const RESET_PHOTON_FRACTION: f64 = 0.01;
/// Upper bound on the full reset time, edges and flat region included.
pub const RESET_BUDGET_NS: f64 = 50.0;

/// Pulse height of the example sweep as a fraction of 2Delta/e.
pub const EXAMPLE_PULSE_FRACTION: f64 = 0.8;
/// Example pulse height at the generator output, uV.
pub const EXAMPLE_PULSE_UV: f64 = 345.0;
/// Example sine-squared edge width, ns.
pub const EXAMPLE_EDGE_NS: f64 = 1.25;

/// Number of combined standard deviations a measured comparison may deviate.
pub const COMPARISON_SIGMAS: f64 = 2.0;

/// `|x - ref| <= COMPARISON_SIGMAS * hypot(sigma_x, sigma_ref)`.
pub fn consistent(value: f64, sigma: f64, reference: Measured) -> bool {
    (value - reference.value).abs() <= COMPARISON_SIGMAS * sigma.hypot(reference.sigma)
}
