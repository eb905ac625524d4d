use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    InputMissing(String),
    #[error("{0}")]
    Input(String),
    #[error("{stage}: {detail}")]
    Computation { stage: &'static str, detail: String },
    #[error("{0}")]
    Output(String),
}

impl CliError {
    /// Stable machine-readable class printed as `error[<class>]`.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::InputMissing(_) => "input-missing",
            CliError::Input(_) => "input-invalid",
            CliError::Computation { .. } => "computation",
            CliError::Output(_) => "output",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::InputMissing(_) => 3,
            CliError::Input(_) => 4,
            CliError::Computation { .. } => 5,
            CliError::Output(_) => 6,
        }
    }

    pub fn compute(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Computation {
            stage,
            detail: e.to_string(),
        }
    }
}
