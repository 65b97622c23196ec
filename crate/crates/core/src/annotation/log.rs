//! Stroke log: one JSON object per line, each a complete stroke with the
//! canvas pose it was drawn on. Both the service and the batch CLI replay
//! this format.

use serde::{Deserialize, Serialize};

use super::canvas::{CanvasPlane, StylusSample};
use super::{BrushMode, Stroke};
use crate::error::AnnotationError;
use crate::volume::{Axis, SliceRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanvasSpec {
    pub origin: [f64; 3],
    pub u_axis: [f64; 3],
    pub v_axis: [f64; 3],
    pub width_mm: f64,
    pub height_mm: f64,
    pub axis: Axis,
    pub index: usize,
    pub pixel_dims: [usize; 2],
}

impl CanvasSpec {
    pub fn from_canvas(canvas: &CanvasPlane) -> Self {
        let slice = canvas.slice();
        let (pw, ph) = canvas.pixel_dims();
        Self {
            origin: canvas.origin(),
            u_axis: canvas.u_axis(),
            v_axis: canvas.v_axis(),
            width_mm: canvas.width_mm(),
            height_mm: canvas.height_mm(),
            axis: slice.axis,
            index: slice.index,
            pixel_dims: [pw, ph],
        }
    }

    pub fn to_canvas(&self) -> Result<CanvasPlane, AnnotationError> {
        CanvasPlane::new(
            self.origin,
            self.u_axis,
            self.v_axis,
            self.width_mm,
            self.height_mm,
            SliceRef::new(self.axis, self.index),
            (self.pixel_dims[0], self.pixel_dims[1]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub tip: [f64; 3],
    pub direction: [f64; 3],
    pub t_ms: f64,
    pub pressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeLogEntry {
    pub stroke_id: u64,
    pub mode: BrushMode,
    pub radius_px: f64,
    pub canvas: CanvasSpec,
    pub samples: Vec<SampleSpec>,
}

impl StrokeLogEntry {
    pub fn new(canvas: &CanvasPlane, stroke: &Stroke) -> Self {
        Self {
            stroke_id: stroke.id,
            mode: stroke.mode,
            radius_px: stroke.radius_px,
            canvas: CanvasSpec::from_canvas(canvas),
            samples: stroke
                .samples
                .iter()
                .map(|s| SampleSpec {
                    tip: s.tip,
                    direction: s.direction(),
                    t_ms: s.timestamp_ms,
                    pressed: s.pressed,
                })
                .collect(),
        }
    }

    /// Validates and converts into engine types. Non-unit ray directions are
    /// normalized; zero-length directions are rejected.
    pub fn to_stroke(&self) -> Result<(CanvasPlane, Stroke), AnnotationError> {
        let canvas = self.canvas.to_canvas()?;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let [x, y, z] = s.direction;
                let n = (x * x + y * y + z * z).sqrt();
                if !(n > 0.0) || !n.is_finite() {
                    return Err(AnnotationError::InvalidStroke("zero-length ray direction".into()));
                }
                // unit directions pass through untouched so logs replay bit-exactly
                StylusSample::new(s.tip, s.direction, s.t_ms, s.pressed)
                    .or_else(|_| StylusSample::new(s.tip, [x / n, y / n, z / n], s.t_ms, s.pressed))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let stroke = Stroke::new(self.stroke_id, self.mode, self.radius_px, samples)?;
        Ok((canvas, stroke))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("stroke log entries always serialize")
    }
}

/// Parses a stroke log. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn parse_stroke_log(text: &str) -> Result<Vec<StrokeLogEntry>, AnnotationError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: StrokeLogEntry = serde_json::from_str(line).map_err(|e| AnnotationError::Schema {
            line: i + 1,
            reason: e.to_string(),
        })?;
        entry.to_stroke().map_err(|e| AnnotationError::Schema {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}
