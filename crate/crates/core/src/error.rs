use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate segment {index}: consecutive points coincide")]
    DegenerateSegment { index: usize },
    #[error("polyline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("view direction is parallel to the fiber tangent")]
    DegenerateDirection,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("light at distance {distance} lies inside the model bounding sphere (radius {radius})")]
    LightInsideBounds { distance: f64, radius: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("forward intermediates are stale (model generation {model}, forward pass {forward})")]
    StaleIntermediates { model: u64, forward: u64 },
    #[error("bad magic: {0:?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported format version: found {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("truncated file: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("trailing data after end of file ({0} bytes)")]
    TrailingData(usize),
    #[error("strands have differing segment counts ({first} vs {other}); the format needs a uniform count")]
    NonUniformStrands { first: usize, other: usize },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("world_to_camera is not rigid (orthogonality residual {0:e})")]
    NonRigid(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
