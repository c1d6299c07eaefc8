use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Arguments outside an operation's domain (bad sizes, negative densities, ...).
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A growth-rate evaluation produced a non-finite value.
    #[error("model error: {0}")]
    Model(String),

    /// A structural modelling assumption does not hold.
    #[error("assumption {assumption} violated: {detail}")]
    AssumptionViolation { assumption: &'static str, detail: String },

    #[error("positivity lost for species {species} at node {node}, t = {time}: value {value}")]
    Positivity {
        species: usize,
        node: usize,
        time: f64,
        value: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// The weight linear program failed numerically (distinct from infeasibility).
    #[error("linear program failed: {0}")]
    LinearProgram(String),

    /// An operation whose precondition is a granted certificate was called without one.
    #[error("precondition not met: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
