//! Iso-surface extraction from binary density grids.

mod density;
mod marching;
pub mod tables;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ExtractError;
use crate::volume::Dims;

pub use density::{build_density_grid, DensityGrid, DensitySource, GridSource};
pub use marching::{extract_isosurface, march_cube, update_region, ExtractionState, RegionUpdate};

/// Marching cubes parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Strictly between 0 and 1. Densities equal to it count as outside.
    pub iso_level: f64,
    /// Cubes per progress/cancellation chunk.
    pub yield_interval: usize,
    /// Stored 8-bit intensity at or above which a scan voxel is foreground.
    pub scan_threshold: u8,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            iso_level: 0.5,
            yield_interval: 1000,
            scan_threshold: 128,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if !(self.iso_level > 0.0 && self.iso_level < 1.0) {
            return Err(ExtractError::InvalidConfig(format!(
                "iso level {} must lie in (0, 1)",
                self.iso_level
            )));
        }
        if self.yield_interval == 0 {
            return Err(ExtractError::InvalidConfig("yield interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Snapshot of a running extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractionProgress {
    pub cubes_done: u64,
    pub cubes_total: u64,
    pub partial_triangles: u64,
    pub cancelled: bool,
}

/// Cooperative cancellation flag shared between a job and its owner.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Release);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Acquire)
    }
}

/// Half-open voxel box `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoxelBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl VoxelBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Self {
        Self { lo, hi }
    }

    pub fn empty() -> Self {
        Self { lo: [0; 3], hi: [0; 3] }
    }

    /// Box holding exactly one voxel.
    pub fn voxel(p: [usize; 3]) -> Self {
        Self {
            lo: p,
            hi: [p[0] + 1, p[1] + 1, p[2] + 1],
        }
    }

    /// Box covering the inclusive corners `a` and `b`.
    pub fn from_inclusive(a: [usize; 3], b: [usize; 3]) -> Self {
        Self {
            lo: [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])],
            hi: [a[0].max(b[0]) + 1, a[1].max(b[1]) + 1, a[2].max(b[2]) + 1],
        }
    }

    pub fn whole(dims: Dims) -> Self {
        Self { lo: [0; 3], hi: dims }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.lo[a] >= self.hi[a])
    }

    pub fn union(&self, other: &VoxelBox) -> VoxelBox {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        VoxelBox {
            lo: [0, 1, 2].map(|a| self.lo[a].min(other.lo[a])),
            hi: [0, 1, 2].map(|a| self.hi[a].max(other.hi[a])),
        }
    }

    pub fn clamp_to(&self, dims: Dims) -> VoxelBox {
        VoxelBox {
            lo: [0, 1, 2].map(|a| self.lo[a].min(dims[a])),
            hi: [0, 1, 2].map(|a| self.hi[a].min(dims[a])),
        }
    }

    pub fn within(&self, dims: Dims) -> bool {
        self.is_empty() || (0..3).all(|a| self.hi[a] <= dims[a])
    }
}
