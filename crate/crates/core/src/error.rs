use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("radius {0} is outside the exterior domain r >= 1")]
    Domain(f64),

    #[error("field shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("non-positive total density {value} at node ({i}, {j})")]
    Positivity { i: usize, j: usize, value: f64 },

    #[error("non-finite value in {what} at node ({i}, {j})")]
    NonFinite { what: &'static str, i: usize, j: usize },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("initial condition: {0}")]
    InitialCondition(String),

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("io: {0}")]
    Io(String),

    #[error("{0}")]
    Usage(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures raised by the solver itself (NaN, vacuum) rather
    /// than by bad input.
    pub fn is_runtime(&self) -> bool {
        match self {
            Error::Positivity { .. } | Error::NonFinite { .. } => true,
            Error::Step { source, .. } => source.is_runtime(),
            _ => false,
        }
    }
}

/// Process exit status for a failed command: 2 for bad input, 3 for
/// failures during the computation or while writing results.
impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::Config(_)
            | Error::InvalidParams(_)
            | Error::InvalidGrid(_)
            | Error::InitialCondition(_)
            | Error::Domain(_)
            | Error::ShapeMismatch { .. }
            | Error::Snapshot(_) => 2,
            Error::Positivity { .. } | Error::NonFinite { .. } | Error::Step { .. } | Error::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
