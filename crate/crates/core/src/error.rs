use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("payoff tensor needs {needed} elements, budget is {budget}")]
    ResourceLimit { needed: u128, budget: u64 },

    #[error("integration failed at t = {t}: step size {step:e} underflowed")]
    IntegrationFailure { t: f64, step: f64, state: Vec<f64> },

    #[error("non-finite value in {0}")]
    NumericDomain(String),

    #[error("derivative singular: a*x reached 1 at z = {z}")]
    SingularDerivative { z: f64 },

    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    SolverFailure {
        best: [f64; 3],
        residual: f64,
        iterations: usize,
    },

    #[error("no sign change of the stability predicate on [{lo}, {hi}] ({detail})")]
    Bracketing { lo: f64, hi: f64, detail: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParameterDomain(_) | Error::Config(_) | Error::ResourceLimit { .. } => 2,
            Error::IntegrationFailure { .. }
            | Error::NumericDomain(_)
            | Error::SingularDerivative { .. }
            | Error::SolverFailure { .. }
            | Error::Bracketing { .. } => 3,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 4,
        }
    }
}
