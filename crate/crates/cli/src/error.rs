use std::fmt;

/// Errors that decide the process exit code: configuration and usage
/// problems exit with 2, runtime failures and failed checks with 1.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or invalid configuration, tagged with a 1-based
    /// line/column position when one exists.
    Config {
        path: String,
        pos: Option<(usize, usize)>,
        msg: String,
    },
    /// Arguments that parse but do not make sense together.
    Usage(String),
    /// File-system trouble around configs or output files.
    Io {
        path: String,
        source: std::io::Error,
    },
    /// A toolkit error raised while executing a scenario.
    Core {
        scenario: String,
        source: qat_core::Error,
    },
}

impl CliError {
    pub fn config(path: &str, pos: Option<(usize, usize)>, msg: impl Into<String>) -> Self {
        CliError::Config {
            path: path.to_string(),
            pos,
            msg: msg.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Core { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config {
                path,
                pos: Some((line, col)),
                msg,
            } => write!(f, "{path}:{line}:{col}: {msg}"),
            CliError::Config {
                path,
                pos: None,
                msg,
            } => write!(f, "{path}: {msg}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Core { scenario, source } => write!(f, "{scenario}: {source}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            CliError::Core { source, .. } => Some(source),
            _ => None,
        }
    }
}
