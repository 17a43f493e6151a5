use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] qgamp_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Spec(String),
    /// No grid point is consistent with the labels.
    #[error("posterior has zero mass on the grid")]
    OracleInfeasible,
    #[error("linear system is not positive definite")]
    Solve,
}

impl HarnessError {
    /// Stable identifier for the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Core(e) => e.kind(),
            HarnessError::Io(_) => "io",
            HarnessError::Csv(_) => "csv",
            HarnessError::Spec(_) => "spec",
            HarnessError::OracleInfeasible => "oracle-infeasible",
            HarnessError::Solve => "solve",
        }
    }
}

impl From<toml::de::Error> for HarnessError {
    fn from(e: toml::de::Error) -> Self {
        HarnessError::Spec(e.message().trim().to_string())
    }
}
