use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver did not converge for a {dim}x{dim} matrix within {max_iterations} iterations")]
    EigenNonConvergence { dim: usize, max_iterations: usize },

    #[error(
        "propagator refinement stopped at {steps} steps per period: \
         achieved shift {achieved:.3e}, target {target:.1e}"
    )]
    RefinementNotConverged { steps: usize, achieved: f64, target: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
