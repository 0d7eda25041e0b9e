use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config entries or parameters.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] twave_core::Error),
    #[error("{action} {}: {source}", path.display())]
    Io {
        action: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("verification status is {0}")]
    VerificationFailed(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                twave_core::Error::Domain { .. } => 1,
                twave_core::Error::RangeExceeded { .. } => 4,
                _ => 2,
            },
            CliError::Io { .. } => 3,
            CliError::VerificationFailed(_) => 5,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "validation",
            CliError::Core(twave_core::Error::Domain { .. }) => "validation",
            CliError::Core(e) => e.category(),
            CliError::Io { .. } => "io",
            CliError::VerificationFailed(_) => "verification",
        }
    }

    /// One line for standard error: `error kind=… exit=… message="…"`.
    pub fn machine_line(&self) -> String {
        let msg = self.to_string().replace('\\', "\\\\").replace('"', "\\\"");
        format!(
            "error kind={} exit={} message=\"{}\"",
            self.category(),
            self.exit_code(),
            msg.replace('\n', " ")
        )
    }
}

pub type CliResult<T> = Result<T, CliError>;
