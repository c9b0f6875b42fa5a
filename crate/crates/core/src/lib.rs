//! Simulation and analysis toolkit for pulsed dissipation control of a
//! superconducting resonator by a quantum-circuit refrigerator (QCR).
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] device parameters, derived couplings, configuration documents
//! * [`tunneling`] Dynes density of states and the NIS tunneling kernel
//! * [`rates`] photon-assisted transition rates and the damping curve γ_QCR(V)
//! * [`pulse`] and [`dynamics`] the bias pulse, control-line distortion and
//!   the resonator amplitude under time-dependent damping
//! * [`trace`] noisy homodyne-style traces and their file format
//! * [`extraction`] damping-rate extraction from pulse-width sweeps
//! * [`pipeline`] sweep orchestration and summary reports used by the CLI

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod dynamics;
pub mod error;
pub mod extraction;
pub mod interp;
pub mod params;
pub mod pipeline;
pub mod pulse;
pub mod quad;
pub mod rates;
pub mod reference;
pub mod trace;
pub mod tunneling;

pub use error::{Error, ErrorKind, Result};
pub use params::{Config, DerivedParams, DeviceParams, EnvironmentRates};
pub use rates::{DampingModel, QcrModel, RateCurve, RatePoint};
