use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Geometry input is degenerate or inconsistent.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Mesh resolution cannot represent a feature (e.g. the aperture).
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A vertex could not be matched under the reflection.
    #[error("symmetry error: {0}")]
    Symmetry(String),

    /// P1 interpolation was asked to extrapolate outside the source domain.
    #[error("extrapolation error: {0}")]
    Extrapolation(String),

    /// Eigensolver did not reach the requested tolerance.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// Mode tracking across the sweep lost the mode.
    #[error("tracking error: {0}")]
    Tracking(String),

    /// A value handed between stages violates an interface contract.
    #[error("contract error: {0}")]
    Contract(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 missing input,
    /// 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::Geometry(_)
            | Error::Resolution(_)
            | Error::Contract(_) => 2,
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 3,
            Error::Io(_) | Error::Json(_) => 3,
            Error::Symmetry(_)
            | Error::Extrapolation(_)
            | Error::Convergence(_)
            | Error::Tracking(_) => 4,
        }
    }
}
