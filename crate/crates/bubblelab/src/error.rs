use thiserror::Error;

/// Errors raised by the numerical layer.
///
/// Variants are split into input validation problems and numerical failures so
/// that front ends can map them onto distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("moment-divergent dimension: n = {n} (need n >= {min})")]
    MomentDivergentDimension { n: usize, min: usize },

    #[error("log-divergent moment: second y_n-moments diverge logarithmically for n = {n}")]
    LogDivergentMoment { n: usize },

    #[error("shooting failed to bracket the initial value in [{lo}, {hi}]")]
    ShootingBracket { lo: f64, hi: f64 },

    #[error("near-optimizer target not reached: best quotient {best} at shift {shift}, target {target}")]
    NearOptimizerTarget { best: f64, shift: f64, target: f64 },

    #[error("quadrature did not converge for {what}: last relative change {change:e}")]
    QuadratureNonConvergence { what: String, change: f64 },

    #[error("chart overflow: support radius {reach} exceeds chart radius {chart}")]
    ChartOverflow { reach: f64, chart: f64 },

    #[error("unfit channel constants: {0}")]
    UnfitChannelConstants(String),

    #[error("identity violated: {0}")]
    IdentityViolation(String),

    #[error("no Bernoulli regime: alpha = {alpha} is outside (0, 1)")]
    NoBernoulliRegime { alpha: f64 },

    #[error("collision: centers {i} and {j} coincide")]
    Collision { i: usize, j: usize },

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
}

impl Error {
    /// True for errors caused by bad parameters rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::MomentDivergentDimension { .. }
                | Error::LogDivergentMoment { .. }
                | Error::UnfitChannelConstants(_)
                | Error::NoBernoulliRegime { .. }
                | Error::Collision { .. }
                | Error::ChartOverflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
