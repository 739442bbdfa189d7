use thiserror::Error;

/// Errors raised by construction and verification routines.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular geometry: {0}")]
    SingularGeometry(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
    #[error("frame inconsistency: {0}")]
    FrameInconsistency(String),
    #[error("unknown mesh: {0}")]
    UnknownMesh(String),
    #[error("mesh file: {0}")]
    MeshFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
