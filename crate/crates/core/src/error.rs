use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid mixing matrix: {0}")]
    InvalidMatrix(String),

    #[error("pulse period {period_s:e} s is shorter than the grid step {dt:e} s")]
    Oversampling { period_s: f64, dt: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("ill-posed fit: {0}")]
    IllPosed(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("isotropic mixture: second-moment curve is flat (q2/q1 = {ratio:e}), principal direction undefined")]
    IsotropicMixture { ratio: f64 },

    #[error("no fourth harmonic: p3/p1 = {ratio:e}, rotation undetermined (Gaussian-like sources)")]
    NoFourthHarmonic { ratio: f64 },

    #[error("degenerate alignment: recovered signal has zero energy")]
    DegenerateAlignment,

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, with stage wrappers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 invalid config, 3 numerical/fit failure, 4 I/O failure.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::InvalidSpec(_) | Error::InvalidMatrix(_) | Error::Config(_) => 2,
            Error::Oversampling { .. } => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
