use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// An endpoint marginal puts mass on a state that the prior cannot connect.
    #[error("infeasible support: {0}")]
    InfeasibleSupport(String),

    #[error("zero potential at time {time}, state {state} carrying positive mass")]
    ZeroPotential { time: usize, state: usize },

    #[error("prior is not fully indecomposable")]
    NotFullyIndecomposable,

    #[error("row {0} of the prior has no outgoing weight")]
    ZeroRow(usize),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("row {row} is not stochastic (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("degenerate request: {0}")]
    Degenerate(String),
}
