use thiserror::Error;

/// Failure modes shared by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("near-singular linear system (pivot {pivot:.3e}, scale {scale:.3e})")]
    NearSingular { pivot: f64, scale: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (last residual {last_norm:.3e})")]
    NoConvergence { iterations: usize, last_norm: f64 },

    #[error("iterate collapsed to the trivial solution u = 0")]
    CollapsedToZero,

    #[error("operation requires a single constant-coefficient focusing power with V = 0")]
    WrongModelKind,

    #[error("tail is not positive on the decay fit window")]
    NonPositiveTail,

    #[error("continuation seed did not pass the solver tolerance (residual {0:.3e})")]
    SeedNotConverged(f64),

    #[error("continuation step collapsed below ds_min = {ds_min:.3e} at lambda = {lambda}")]
    StepCollapse { ds_min: f64, lambda: f64 },

    #[error("need at least {needed} branch points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("masses not covered by any branch: {0:?}")]
    UncoveredMass(Vec<f64>),

    #[error("no Nehari projection: t -> Phi(t u) has no interior maximum")]
    NoProjection,

    #[error("critical exponent (p - 2) n = 4: scaling transform undefined")]
    CriticalExponent,

    #[error("gradient flow did not converge after {steps} steps (residual {residual:.3e})")]
    NotConverged { steps: usize, residual: f64 },

    #[error("NaN detected in gradient flow at step {0}; halve dt")]
    NaNDetected(usize),

    #[error("state is identically zero")]
    ZeroState,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
