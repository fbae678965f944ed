use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("invalid problem: {0}")]
    Spec(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solver(#[from] stabrad::Error),
}

impl CliError {
    /// 4 for bad input, 2 for a solver that gave up.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(e) => match e {
                stabrad::Error::DimensionMismatch(_)
                | stabrad::Error::UnstableA(_)
                | stabrad::Error::InvalidEpsilon { .. }
                | stabrad::Error::InvalidArgument(_) => 4,
                _ => 2,
            },
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
