use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("agent index {index} out of range for {count} agents")]
    InvalidAgent { index: usize, count: usize },

    #[error("action norm {norm} outside admissible range [{min}, {max}]")]
    ActionOutOfRange { norm: f64, min: f64, max: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite utility for sample {sample}")]
    NonFiniteUtility { sample: usize },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("solver failed for agent {agent} at IBR iteration {iteration}: {source}")]
    Solver {
        agent: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("episode failed at timestep {timestep}: {source}")]
    Episode {
        timestep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
