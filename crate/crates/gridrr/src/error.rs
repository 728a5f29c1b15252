use crate::validate::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported regime: {0}")]
    Regime(String),
    #[error("multigraph is not regular: {0}")]
    Regularity(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("plan is invalid ({} violations)", .0.violations.len())]
    InvalidPlan(Box<ValidationReport>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
