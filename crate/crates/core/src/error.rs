use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integrand returned a non-finite value at {at}")]
    Evaluation { at: f64 },

    #[error("quadrature did not converge within {nodes} nodes")]
    Convergence { nodes: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("grid of {grid} intervals too coarse for kappa = {kappa}: non-positive interior value")]
    RefinementRequired { kappa: f64, grid: usize },

    #[error("tilde weight is degenerate (normalization {0:e})")]
    DegenerateWeight(f64),

    #[error("model error: {0}")]
    Model(String),

    #[error("degenerate kernel: zeroth moment {0:e}")]
    DegenerateKernel(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite state at step {step}")]
    BlowUp { step: usize },

    #[error("density became non-positive at step {step}")]
    Positivity { step: usize },
}

impl Error {
    /// Validation errors come from bad input; everything else is a numeric failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Model(_) | Error::Config(_) | Error::DegenerateKernel(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
