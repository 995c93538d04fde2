use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CldError {
    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image has zero dimension ({width}x{height})")]
    Dimension { width: u32, height: u32 },

    #[error("pixel buffer length {len} does not match {width}x{height}")]
    BufferSize { width: u32, height: u32, len: usize },

    #[error("degenerate image: {0}")]
    DegenerateImage(&'static str),

    #[error("saturation threshold must be positive, got {0}")]
    InvalidTau(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no direction has any computable coherence length")]
    NoSupport,

    #[error("quality product vanishes on the whole grid; fallback tau = {fallback_tau}")]
    DegenerateCurve { fallback_tau: f64 },

    #[error("every local diagram matches the overall shape; mismatch mean is zero")]
    UniformShape,

    #[error("no pixel is supported; the table is empty")]
    EmptyTable,

    #[error("no pixel is defective at any threshold; the partition is empty")]
    EmptyPartition,

    #[error("requested coverage {requested}% is unreachable; attainable maximum is {attainable}%")]
    UnreachableCoverage { requested: f64, attainable: f64 },

    #[error("requested defect percentage {requested}% exceeds the maximum {alpha_max}%")]
    UnreachableDefect { requested: f64, alpha_max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Encode(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CldError>;
