use thiserror::Error;

use crate::problem::BoundaryKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("potential is resonant for {bc} conditions (|det| = {determinant:e})")]
    ResonantPotential { bc: BoundaryKind, determinant: f64 },

    #[error("integrator produced a non-finite value at t = {t}")]
    IntegratorFailure { t: f64 },

    #[error("no eigenvalue bracket for {bc} conditions in [{lo}, {hi}]")]
    BracketingFailure { bc: BoundaryKind, lo: f64, hi: f64 },

    #[error("sign undetermined: {which} = {value:e} is zero within tolerance")]
    Undetermined { which: &'static str, value: f64 },

    #[error("eigenfunction is not positive at t = {t} (value {value:e})")]
    NotPositive { t: f64, value: f64 },

    #[error("weighted integral of the kernel is {value:e} <= 0 at t = {t}")]
    NonpositiveWeightedIntegral { t: f64, value: f64 },

    #[error("quadrature produced a non-finite value near ({t}, {s})")]
    QuadratureFailure { t: f64, s: f64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("operation not supported for {0} conditions")]
    UnsupportedBoundaryKind(BoundaryKind),

    #[error("eta = {eta:e} is not positive on [{c}, {d}]")]
    NonpositiveEta { eta: f64, c: f64, d: f64 },

    #[error("nonlinearity is not finite at (t, x) = ({t}, {x})")]
    EvaluationFailure { t: f64, x: f64 },

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake_case tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPotential(_) => "invalid_potential",
            Error::ResonantPotential { .. } => "resonant_potential",
            Error::IntegratorFailure { .. } => "integrator_failure",
            Error::BracketingFailure { .. } => "bracketing_failure",
            Error::Undetermined { .. } => "undetermined",
            Error::NotPositive { .. } => "not_positive",
            Error::NonpositiveWeightedIntegral { .. } => "nonpositive_weighted_integral",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::OutOfRange(_) => "out_of_range",
            Error::InvalidWeight(_) => "invalid_weight",
            Error::UnsupportedBoundaryKind(_) => "unsupported_boundary_kind",
            Error::NonpositiveEta { .. } => "nonpositive_eta",
            Error::EvaluationFailure { .. } => "evaluation_failure",
            Error::Parse { .. } => "parse",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io(_) => "io",
        }
    }
}
