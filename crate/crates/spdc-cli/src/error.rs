//! Error type with the process exit-code contract:
//! 1 usage, 2 data, 3 numeric.

use spdc::baseline::BaselineError;
use spdc::loss::LossError;
use spdc::solver::SolverError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<spdc::dataset::DataError> for CliError {
    fn from(e: spdc::dataset::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("experiment spec: {e}"))
    }
}

impl From<spdc::trace::TraceError> for CliError {
    fn from(e: spdc::trace::TraceError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<spdc::regularizer::RegError> for CliError {
    fn from(e: spdc::regularizer::RegError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::ProxNoConvergence { .. } => CliError::Numeric(e.to_string()),
            LossError::InvalidLabel(_) => CliError::Data(e.to_string()),
            LossError::UnknownKind(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Loss(inner) => inner.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Loss(inner) => inner.into(),
            BaselineError::ToleranceUnreached { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}
