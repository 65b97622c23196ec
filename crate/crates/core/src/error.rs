use std::path::PathBuf;

use thiserror::Error;

use crate::mesh::TriangleMesh;
use crate::surface::ExtractionProgress;
use crate::volume::{Axis, Dims, Spacing};

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("empty slice stack")]
    EmptyStack,
    #[error("dimension mismatch{}: expected {expected:?}, got {actual:?}", slice.map(|i| format!(" at slice {i}")).unwrap_or_default())]
    DimensionMismatch {
        slice: Option<usize>,
        expected: Dims,
        actual: Dims,
    },
    #[error("unsupported pixel format: {0}")]
    UnsupportedPixelFormat(String),
    #[error("failed to decode {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("invalid window (center {center}, width {width}); width must be positive")]
    InvalidWindow { center: f64, width: f64 },
    #[error("{axis} slice {index} out of range (extent {extent})")]
    IndexOutOfRange { axis: Axis, index: usize, extent: usize },
    #[error("invalid dimensions {0:?}")]
    InvalidDims(Dims),
    #[error("invalid spacing {0:?}")]
    InvalidSpacing(Spacing),
    #[error("expected {expected} voxels, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("label {value} at voxel {index} is neither 0 nor 255")]
    InvalidLabel { index: usize, value: u8 },
    #[error("unknown axis {0:?}")]
    UnknownAxis(String),
    #[error("malformed metadata: {0}")]
    BadMetadata(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl VolumeError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VolumeError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable name of the error class, used in service responses.
    pub fn kind(&self) -> &'static str {
        match self {
            VolumeError::EmptyStack => "EmptyStack",
            VolumeError::DimensionMismatch { .. } => "DimensionMismatch",
            VolumeError::UnsupportedPixelFormat(_) => "UnsupportedPixelFormat",
            VolumeError::DecodeError { .. } => "DecodeError",
            VolumeError::InvalidWindow { .. } => "InvalidWindow",
            VolumeError::IndexOutOfRange { .. } => "IndexOutOfRange",
            VolumeError::InvalidDims(_) => "InvalidDims",
            VolumeError::InvalidSpacing(_) => "InvalidSpacing",
            VolumeError::LengthMismatch { .. } => "LengthMismatch",
            VolumeError::InvalidLabel { .. } => "InvalidLabel",
            VolumeError::UnknownAxis(_) => "UnknownAxis",
            VolumeError::BadMetadata(_) => "BadMetadata",
            VolumeError::Io { .. } => "IoError",
        }
    }
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("ray is parallel to the canvas plane")]
    DegenerateRay,
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("invalid canvas: {0}")]
    InvalidCanvas(String),
    #[error("invalid stroke: {0}")]
    InvalidStroke(String),
    #[error("shape mismatch: slice {slice:?} vs mask {mask:?}")]
    ShapeMismatch {
        slice: (usize, usize),
        mask: (usize, usize),
    },
    #[error("invalid overlay alpha {0}")]
    InvalidAlpha(f64),
    #[error("stroke log line {line}: {reason}")]
    Schema { line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("extraction cancelled after {} of {} cubes", .progress.cubes_done, .progress.cubes_total)]
    Cancelled {
        progress: ExtractionProgress,
        partial: Box<TriangleMesh>,
    },
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
    #[error("change box {0:?}..{1:?} outside grid")]
    BoxOutOfBounds([usize; 3], [usize; 3]),
    #[error("grid dims {grid:?} differ from extraction state dims {state:?}")]
    GridMismatch { grid: Dims, state: Dims },
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("decimation stopped at {achieved} triangles, target {target}")]
    TargetUnreachable {
        best: Box<TriangleMesh>,
        target: usize,
        achieved: usize,
    },
    #[error("invalid decimation config: {0}")]
    InvalidConfig(String),
    #[error("invalid level-of-detail ladder: {0}")]
    InvalidLadder(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl MeshError {
    /// For `TargetUnreachable`, the best mesh reached; other errors pass through.
    pub fn into_best(self) -> Result<TriangleMesh, MeshError> {
        match self {
            MeshError::TargetUnreachable { best, .. } => Ok(*best),
            other => Err(other),
        }
    }
}
