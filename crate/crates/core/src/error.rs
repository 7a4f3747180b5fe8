//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("in-plane velocity is zero: the characteristic never reaches the boundary")]
    NoBoundaryInteraction,

    #[error("characteristic reaches the initial data before the first bounce (t = {t}, first hit after {tau_b})")]
    ReachesInitialData { t: f64, tau_b: f64 },

    #[error("grazing chord: |phi| = {phi} is not below pi/2")]
    GrazingChord { phi: f64 },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("steady state is undefined for velocities with zero in-plane component")]
    UndefinedSteadyState,

    #[error("quadrature failed to converge (last estimate {estimate})")]
    QuadratureNotConverged { estimate: f64 },

    #[error("renewal residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualCheck {
        residual: f64,
        tolerance: f64,
        /// Maximum residual over boundary nodes at each time level.
        profile: Vec<f64>,
    },

    #[error("non-finite flux at node {node}, time level {level}")]
    NonFiniteFlux { node: usize, level: usize },

    #[error("flux history covers [0, {horizon}] but t = {t} was requested")]
    HistoryExhausted { t: f64, horizon: f64 },

    #[error("velocity-dependent damping (p_nu = {p_nu}) is only supported by the Monte Carlo path")]
    VelocityDependentDamping { p_nu: f64 },

    #[error("particle {index} left the domain: |x| = {radius} at t = {t}")]
    ParticleEscape { index: usize, radius: f64, t: f64 },

    #[error("power-law fit failed: {0}")]
    Fit(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter { name, message: message.into() }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// True for errors caused by bad input rather than a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Config { .. }
                | Error::Parse(_)
                | Error::VelocityDependentDamping { .. }
                | Error::NoBoundaryInteraction
                | Error::ReachesInitialData { .. }
                | Error::GrazingChord { .. }
                | Error::UndefinedSteadyState
                | Error::HistoryExhausted { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
