use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DIVERGENCE: i32 = 3;
    pub const CAPACITY: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: gsprep_core::Error,
    },

    #[error(transparent)]
    Core(#[from] gsprep_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use gsprep_core::Error as E;
        let core = match self {
            CliError::Config(_) | CliError::Json(_) | CliError::Csv(_) => return exit::CONFIG,
            CliError::Io { .. } => return exit::FAILURE,
            CliError::Stage { source, .. } | CliError::Core(source) => source,
        };
        match core {
            E::InvalidArgument(_) | E::Format { .. } => exit::CONFIG,
            E::Capacity { .. } | E::InsufficientSupport { .. } => exit::CAPACITY,
            E::Convergence { .. }
            | E::Degenerate { .. }
            | E::NumericalDivergence { .. }
            | E::SamplingDegeneracy
            | E::VanishingSuccess { .. }
            | E::Fit { .. }
            | E::Domain(_) => exit::DIVERGENCE,
            E::Io(_) => exit::FAILURE,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for gsprep_core::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
