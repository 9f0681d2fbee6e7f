use thiserror::Error;

/// Errors produced by simulation and statistics routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("hausdorff distance undefined for an empty family")]
    EmptyFamily,
    #[error("tracked path came within diffusive reach of the window edge")]
    BoundaryContamination,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
