use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}:{line}:{column}: {message}")]
    Config {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("hypotheses violated: {0}")]
    Hypotheses(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Core(#[from] plapsys::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use plapsys::Error as E;
        match self {
            Self::Config { .. } | Self::Invalid(_) | Self::Hypotheses(_) | Self::Io { .. } => EXIT_USAGE,
            Self::Certification(_) | Self::Verification(_) => EXIT_CHECK_FAILED,
            Self::Core(e) => match e {
                E::NonConvergence { .. } | E::NotPositiveDefinite { .. } | E::DegenerateEigenfield { .. } => {
                    EXIT_NO_CONVERGENCE
                }
                E::CTooSmall { .. }
                | E::InfeasibleSearch { .. }
                | E::Lattice { .. }
                | E::MonotonicityViolation { .. }
                | E::InvarianceFailure { .. }
                | E::OutsideCone { .. } => EXIT_CHECK_FAILED,
                _ => EXIT_USAGE,
            },
        }
    }
}
