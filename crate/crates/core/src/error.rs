use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter {name} out of range: {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("parameters must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(
        "twin fixed points do not exist: alpha/alpha_c = {alpha_ratio} <= f(eps T2) = {threshold}"
    )]
    NonExistent { alpha_ratio: f64, threshold: f64 },
    #[error("y = {y} outside the open interval ({lo}, {hi})")]
    OutOfDomain { y: f64, lo: f64, hi: f64 },
    #[error("no Hopf root for alpha/alpha_c = {alpha_ratio}")]
    NoRoot { alpha_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite or runaway state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid integration request: {0}")]
    InvalidInput(String),
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CycleError {
    #[error("trajectory settled onto a fixed point near {state:?}")]
    FixedPointReached { state: [f64; 3] },
    #[error("no periodic return within tolerance")]
    NotPeriodic,
    #[error("shooting Newton diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("singular shooting matrix")]
    SingularShootingMatrix,
    #[error("continuation stalled at parameter {param}")]
    ContinuationStalled { param: f64 },
    #[error("guess closure residual {0} too large")]
    PoorGuess(f64),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("harmonic balance Newton failed from the analytic seed")]
    NoSolution,
    #[error("perturbative expansion requires eps T2 > 2 (got {0})")]
    NotSupercritical(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("route {route} detector inconclusive: {reason}")]
    DetectorInconclusive {
        route: u8,
        reason: String,
        diagnostics: Box<crate::classify::EventDiagnostics>,
    },
    #[error("unknown route {0} (expected 1 to 5)")]
    UnknownRoute(u8),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}
