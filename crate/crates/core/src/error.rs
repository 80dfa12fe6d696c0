use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Integration produced a non-finite or exploding state.
    #[error("integration diverged in epoch {epoch} at substep {substep}")]
    Divergence { epoch: usize, substep: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "decision {decision:?} is not in the feasible set of segment {segment} at epoch {epoch}"
    )]
    InfeasibleDecision {
        segment: usize,
        epoch: usize,
        decision: Vec<f64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Schema or semantic violation, with a field path such as `segments[2].decisions[1]`.
    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    #[error("state space too large: {pairs} state-decision pairs exceed the cap of {cap}; use state clustering")]
    StateSpaceTooLarge { pairs: u128, cap: u128 },

    #[error("structural error: {0}")]
    Structure(String),

    #[error("parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("benchmark infeasible: {0}")]
    BenchmarkInfeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}
