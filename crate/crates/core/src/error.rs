use thiserror::Error;

pub type Result<T> = std::result::Result<T, PlateError>;

#[derive(Debug, Error)]
pub enum PlateError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("instability detected: {0}")]
    Instability(String),
    #[error("CFL violation: dt = {dt} exceeds ds = {ds}")]
    CflViolation { dt: f64, ds: f64 },
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("threshold check not applicable: E0 = {0} < 0")]
    NotApplicable(f64),
    #[error("non-positive energy {value:e} at t = {t} inside the fit window")]
    NonpositiveEnergy { t: f64, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
