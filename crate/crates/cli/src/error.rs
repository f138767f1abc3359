use kglab_core::LabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid scenario: {0}")]
    Invalid(String),

    #[error("unknown scenario `{0}` (see `kglab list`)")]
    UnknownScenario(String),

    #[error("stability precondition violated: {0}")]
    Stability(String),

    #[error("numerical divergence in stage `{stage}`: {source}")]
    Divergence { stage: String, source: LabError },

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: LabError },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("tolerance checks failed: {}", .0.join(", "))]
    Checks(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Invalid(_) | CliError::UnknownScenario(_) => 2,
            CliError::Stability(_) => 3,
            CliError::Divergence { .. } => 4,
            CliError::Stage { .. } | CliError::Io(_) | CliError::Checks(_) => 1,
        }
    }

    /// Attach a solver error to the stage that raised it.
    pub fn from_stage(stage: impl ToString, err: LabError) -> Self {
        let stage = stage.to_string();
        match err {
            LabError::CflViolation { .. } => CliError::Stability(format!("{stage}: {err}")),
            LabError::Divergence { .. } => CliError::Divergence { stage, source: err },
            source => CliError::Stage { stage, source },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
