use thiserror::Error;

/// Errors produced by the geometric pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pixel ({u}, {v}) is outside the {width}x{height} image")]
    OutOfBounds {
        u: i64,
        v: i64,
        width: usize,
        height: usize,
    },
    #[error("pixel ({u}, {v}) appears more than once")]
    DuplicatePixel { u: usize, v: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid depth value {value} at ({u}, {v})")]
    InvalidDepth { u: usize, v: usize, value: f64 },
    #[error("only {found} valid floor normals, need at least {required}")]
    InsufficientFloor { found: usize, required: usize },
    #[error("gravity in-plane component {norm:.4} is below the degeneracy threshold")]
    DegenerateGravity { norm: f64 },
    #[error("only {found} valid points, need at least {required}")]
    InsufficientPoints { found: usize, required: usize },
    #[error("every sampled point triple was degenerate")]
    DegenerateSample,
    #[error("no valid normals inside the plane mask")]
    NoValidNormals,
    #[error("no 3D points support the plane")]
    NoSupport,
    #[error("no pixel is valid in both images")]
    EmptyOverlap,
    #[error("unknown plane label {0}")]
    UnknownLabel(u16),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
