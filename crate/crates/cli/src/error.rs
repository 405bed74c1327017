use std::path::PathBuf;

use thiserror::Error;

/// Pipeline failures, split by exit status: configuration problems exit 1,
/// problems with the data itself exit 2.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("missing input file for --{flag}: {}", path.display())]
    MissingInput { flag: &'static str, path: PathBuf },
    #[error("no --{0} given (required by this subcommand)")]
    InputNotConfigured(&'static str),
    #[error("{module}: {message}")]
    Data { module: &'static str, message: String },
    #[error("writing {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn data(module: &'static str, message: impl ToString) -> Self {
        PipelineError::Data {
            module,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_)
            | PipelineError::MissingInput { .. }
            | PipelineError::InputNotConfigured(_) => 1,
            PipelineError::Data { .. } | PipelineError::Output { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
