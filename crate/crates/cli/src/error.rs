use thiserror::Error;
use twinmaser::{
    AnalyticError, ClassifyError, CycleError, IntegrateError, ParamError, PerturbError,
};

/// Every failure maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalyticError> for CliError {
    fn from(e: AnalyticError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::InvalidInput(m) => CliError::Validation(m),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<CycleError> for CliError {
    fn from(e: CycleError) -> Self {
        match e {
            CycleError::Analytic(a) => a.into(),
            CycleError::Integrate(i) => i.into(),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<PerturbError> for CliError {
    fn from(e: PerturbError) -> Self {
        match e {
            PerturbError::NotSupercritical(_) => CliError::Validation(e.to_string()),
            PerturbError::NoSolution => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::DetectorInconclusive { .. } => CliError::Numerical(e.to_string()),
            ClassifyError::UnknownRoute(_) | ClassifyError::InvalidGrid(_) => {
                CliError::Validation(e.to_string())
            }
        }
    }
}
