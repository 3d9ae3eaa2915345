use std::io;
use std::path::PathBuf;

/// Process exit statuses of the command-line driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exit {
    Success = 0,
    VerdictFailure = 1,
    Usage = 2,
    Rejected = 3,
    Exhausted = 4,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] binsos_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("i/o: {0}")]
    Stream(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("trace line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn exit(&self) -> Exit {
        use binsos_core::Error as E;
        match self {
            Error::Core(e) => match e {
                E::Roles { .. }
                | E::Precondition(_)
                | E::TimingMismatch { .. }
                | E::Inapplicable(_)
                | E::UnsolvableLine => Exit::Rejected,
                E::BudgetExhausted(_) | E::SeedSearch(_) => Exit::Exhausted,
                E::ReplayDiverged(_) => Exit::VerdictFailure,
                _ => Exit::Usage,
            },
            Error::Io { .. } | Error::Stream(_) | Error::Json(_) | Error::TraceFormat { .. } | Error::Usage(_) => {
                Exit::Usage
            }
        }
    }
}
