use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const CODE: i32 = 3;
    pub const BUDGET: i32 = 4;
    pub const LEMMA: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("code error: {0}")]
    Code(String),

    #[error("decoder budget abort: {0}")]
    Budget(String),

    #[error("lemma verification failed: {0}")]
    Lemma(String),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Code(_) => exit::CODE,
            CliError::Budget(_) => exit::BUDGET,
            CliError::Lemma(_) => exit::LEMMA,
            CliError::Io(_) => exit::IO,
        }
    }

    /// Classifies a library error raised while building or running a code.
    pub fn from_run(e: osc_unwrap::Error) -> Self {
        use osc_unwrap::Error as E;
        match e {
            ref err if err.is_budget() => CliError::Budget(err.to_string()),
            E::Dimension { .. } | E::NotSymplectic { .. } | E::Parse(_) | E::Io { .. } => {
                CliError::Code(e.to_string())
            }
            other => CliError::Io(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
