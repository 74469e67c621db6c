use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Core(#[from] fluxtorque::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed config JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        use fluxtorque::Error as E;
        match self {
            CliError::Config { .. } | CliError::Json(_) => "validation",
            CliError::Io(_) => "io",
            CliError::Core(e) => match e {
                E::Config { .. } | E::UnknownMaterial(_) | E::StepTooLarge { .. } => "validation",
                E::NonConvergence { .. } | E::TailDominated { .. } => "quadrature",
                E::Io(_) => "io",
                _ => "numerical",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "validation" => 2,
            "quadrature" => 3,
            "io" => 4,
            _ => 1,
        }
    }
}
