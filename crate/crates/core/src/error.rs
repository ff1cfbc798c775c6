use alloc::string::String;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid mesh request: {0}")]
    InvalidMesh(String),
    #[error("degenerate mesh: nodes {0} and {1} coincide")]
    DegenerateMesh(usize, usize),
    #[error("ill-posed contrast: k = {k} gives |lambda| = {lambda_abs}, too close to 1/2")]
    IllPosedContrast { k: f64, lambda_abs: f64 },
    #[error("invalid conductivity k = {0} (need k > 0, k != 1)")]
    InvalidConductivity(f64),
    #[error("transmitter {index} lies on the boundary (distance {distance:e})")]
    Placement { index: usize, distance: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("fine lattice depth {depth} too coarse for scale {scale} (need depth >= {required})")]
    Resolution { depth: i32, scale: i32, required: i32 },
    #[error("mesh under-resolved for scale {scale}: spacing {spacing:.3e} exceeds {limit:.3e}")]
    UnderResolved { scale: i32, spacing: f64, limit: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),
    #[error("empty mask")]
    EmptyMask,
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;
