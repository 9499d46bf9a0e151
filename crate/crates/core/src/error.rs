use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Malformed or out-of-range input (bad indices, ragged tables, incomplete allocations).
    #[error("invalid input: {0}")]
    Input(String),

    /// An exhaustive search would exceed its configured budget.
    #[error("enumeration of {needed} allocations exceeds the budget of {budget}")]
    Budget { needed: u128, budget: u64 },

    /// The constructive solver only covers residual instances with at most five agents.
    #[error("no constructive solver for {agents} agents after big-item reduction (supported: 1..=5)")]
    UnsupportedSize { agents: usize },

    /// A step that the existence proofs guarantee did not go through. Always a bug.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
