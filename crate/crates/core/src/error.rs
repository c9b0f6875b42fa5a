use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure classes shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing field `{0}`")]
    MissingField(&'static str),

    #[error("{reason} {field}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("photon energy exceeds gap: h*f0 = {photon_uev:.3} ueV >= Delta = {gap_uev:.3} ueV")]
    PhotonAboveGap { photon_uev: f64, gap_uev: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: achieved relative error {achieved:.3e} after {intervals} panels")]
    Quadrature { achieved: f64, intervals: usize },

    #[error("voltage {volts:.6e} V outside tabulated range [{min:.6e}, {max:.6e}] V")]
    OutOfRange { volts: f64, min: f64, max: f64 },

    #[error("no cooling at this bias (Gamma_down = {down:.6e}, Gamma_up = {up:.6e})")]
    NoCooling { down: f64, up: f64 },

    #[error("rate evaluation failed at V = {volts:.6e} V: {source}")]
    AtVoltage {
        volts: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("step-size underflow: {0}")]
    StepUnderflow(String),

    #[error("insufficient linear region: {0}")]
    InsufficientLinearRegion(String),

    #[error("singular normal equations: {0}")]
    SingularFit(String),

    #[error("malformed CSV {path}: {reason}")]
    MalformedCsv { path: PathBuf, reason: String },

    #[error("missing sidecar {0}")]
    MissingSidecar(PathBuf),

    #[error("length mismatch: sidecar declares {expected} samples, CSV holds {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-monotonic time axis at sample {index}")]
    NonMonotonicTime { index: usize },

    #[error("malformed document: {0}")]
    Document(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn non_positive(field: &'static str) -> Self {
        Self::invalid(field, "non-positive")
    }

    /// Broad class of the failure, used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MissingField(_)
            | Error::InvalidParam { .. }
            | Error::PhotonAboveGap { .. }
            | Error::Precondition(_)
            | Error::Document(_) => ErrorKind::Config,
            Error::Quadrature { .. }
            | Error::OutOfRange { .. }
            | Error::NoCooling { .. }
            | Error::StepUnderflow(_)
            | Error::SingularFit(_) => ErrorKind::Numerical,
            Error::AtVoltage { source, .. } => source.kind(),
            Error::InsufficientLinearRegion(_) => ErrorKind::InsufficientLinearRegion,
            Error::MalformedCsv { .. }
            | Error::MissingSidecar(_)
            | Error::LengthMismatch { .. }
            | Error::NonMonotonicTime { .. }
            | Error::Io(_) => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    InsufficientLinearRegion,
    Io,
}
