use std::fmt::Display;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or missing input, detected before any compute.
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: BoxError,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }

    pub fn validation(msg: impl Display) -> Self {
        CliError::Validation(msg.to_string())
    }
}

/// Wraps any error as a failure of `stage`.
pub fn in_stage<E: Into<BoxError>>(stage: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Stage {
        stage,
        source: e.into(),
    }
}

pub type CliResult<T> = Result<T, CliError>;
