use std::path::PathBuf;

use toxprompt_core::attribution::AttributionError;
use toxprompt_core::classifiers::ClassifyError;
use toxprompt_core::corpus::CorpusError;
use toxprompt_core::evaluation::EvalError;
use toxprompt_core::mock::FixtureError;
use toxprompt_core::prompting::PromptError;

/// Errors from loading files and configuration.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: row {row}: {message}", path.display())]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{}: unmappable label '{value}' at row {row}", path.display())]
    UnmappableLabel {
        path: PathBuf,
        value: String,
        row: usize,
    },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("{}: {source}", path.display())]
    Fixture {
        path: PathBuf,
        #[source]
        source: FixtureError,
    },
    #[error("{}: {source}", path.display())]
    Prompt {
        path: PathBuf,
        #[source]
        source: PromptError,
    },
    #[error("{0}")]
    Config(String),
}

impl LoadError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LoadError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LoadError::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Input = 2,
    Transport = 3,
    Quality = 4,
}

/// Top-level command failure, carrying the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    Quality(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Load(_) | CliError::Input(_) => ExitCode::Input,
            CliError::Transport(_) => ExitCode::Transport,
            CliError::Quality(_) => ExitCode::Quality,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> Self {
        match &err {
            EvalError::Unlabeled(_) | EvalError::EmptyDataset(_) => CliError::Input(err.to_string()),
            EvalError::AllSkipped { transport: true, .. } => CliError::Transport(err.to_string()),
            EvalError::AllSkipped { .. } | EvalError::SkipRateExceeded { .. } => {
                CliError::Quality(err.to_string())
            }
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(err: ClassifyError) -> Self {
        match &err {
            ClassifyError::Backend(b) if b.is_transport() => CliError::Transport(err.to_string()),
            _ => CliError::Input(err.to_string()),
        }
    }
}

impl From<AttributionError> for CliError {
    fn from(err: AttributionError) -> Self {
        CliError::Quality(err.to_string())
    }
}
