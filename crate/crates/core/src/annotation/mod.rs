//! Stylus-driven brush annotation on mask slices.
//!
//! Samples are ray-cast onto a [`CanvasPlane`], consecutive hits are joined
//! by linear interpolation, and the swept brush footprint is written into the
//! mask. Every applied stroke yields an [`EditRecord`] that the
//! [`EditJournal`] can undo and redo.

mod canvas;
mod journal;
mod log;
mod overlay;
mod raster;

use serde::{Deserialize, Serialize};

use crate::error::AnnotationError;
use crate::volume::{SliceRef, BACKGROUND, FOREGROUND};

pub use canvas::{project_sample, CanvasPlane, PixelPoint, StylusSample};
pub use journal::{redo, undo, EditJournal, DEFAULT_JOURNAL_DEPTH};
pub use log::{parse_stroke_log, CanvasSpec, SampleSpec, StrokeLogEntry};
pub use overlay::{composite_overlay, RgbaImage};
pub use raster::{apply_stroke, interpolate_points, stamp_brush, stroke_coverage, stroke_gap, stroke_runs, Coverage};

/// Whether a brush paints foreground or erases it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BrushMode {
    Additive,
    Subtractive,
}

impl BrushMode {
    pub fn target_label(self) -> u8 {
        match self {
            BrushMode::Additive => FOREGROUND,
            BrushMode::Subtractive => BACKGROUND,
        }
    }
}

/// Pen-down to pen-up sequence of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub id: u64,
    pub mode: BrushMode,
    pub radius_px: f64,
    pub samples: Vec<StylusSample>,
}

impl Stroke {
    pub fn new(id: u64, mode: BrushMode, radius_px: f64, samples: Vec<StylusSample>) -> Result<Self, AnnotationError> {
        let stroke = Self {
            id,
            mode,
            radius_px,
            samples,
        };
        stroke.validate()?;
        Ok(stroke)
    }

    pub fn validate(&self) -> Result<(), AnnotationError> {
        if !(self.radius_px >= 0.0) || !self.radius_px.is_finite() {
            return Err(AnnotationError::InvalidStroke(format!(
                "radius {} must be finite and non-negative",
                self.radius_px
            )));
        }
        if self.samples.is_empty() {
            return Err(AnnotationError::InvalidStroke("stroke has no samples".into()));
        }
        if self
            .samples
            .windows(2)
            .any(|w| w[1].timestamp_ms < w[0].timestamp_ms)
        {
            return Err(AnnotationError::InvalidStroke("timestamps must be non-decreasing".into()));
        }
        Ok(())
    }
}

/// One pixel whose label changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelChange {
    pub x: u32,
    pub y: u32,
    pub old: u8,
    pub new: u8,
}

/// Label changes made by one stroke on one slice, in row-major pixel order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditRecord {
    pub slice: SliceRef,
    pub stroke_id: u64,
    pub changes: Vec<PixelChange>,
}

impl EditRecord {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.changes.len()
    }

    /// Inclusive pixel bounding box `((x0, y0), (x1, y1))` of the changes.
    pub fn pixel_bounds(&self) -> Option<((u32, u32), (u32, u32))> {
        let first = self.changes.first()?;
        let mut lo = (first.x, first.y);
        let mut hi = lo;
        for c in &self.changes {
            lo = (lo.0.min(c.x), lo.1.min(c.y));
            hi = (hi.0.max(c.x), hi.1.max(c.y));
        }
        Some((lo, hi))
    }

    /// Inclusive voxel box touched by the changes.
    pub fn voxel_bounds(&self) -> Option<([usize; 3], [usize; 3])> {
        let ((x0, y0), (x1, y1)) = self.pixel_bounds()?;
        let a = self.slice.axis.voxel(self.slice.index, x0 as usize, y0 as usize);
        let b = self.slice.axis.voxel(self.slice.index, x1 as usize, y1 as usize);
        Some((
            [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])],
            [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])],
        ))
    }
}
