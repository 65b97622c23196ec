//! Brush rasterization.
//!
//! A pixel is painted when its center lies within `radius_px` of the pen
//! path, or when the path itself passes through the pixel's half-open square.
//! The second clause only matters for brushes thinner than half a pixel
//! diagonal; it guarantees that a radius-0 pen marks the pixels under it.

use super::canvas::{project_sample, CanvasPlane, PixelPoint};
use super::{BrushMode, EditRecord, PixelChange, Stroke};
use crate::error::AnnotationError;
use crate::volume::{MaskVolume, SliceRef};

/// Beyond this radius every pixel crossed by the path already has its center
/// within the radius (half diagonal is ~0.7071).
const FOOTPRINT_IMPLIED_RADIUS: f64 = 0.75;

/// Interpolation spacing used for a brush of `radius_px`.
pub fn stroke_gap(radius_px: f64) -> f64 {
    (radius_px / 2.0).max(0.5)
}

/// Evenly spaced points from `p0` to `p1` (both included, exactly) with
/// consecutive distance at most `max_gap_px`.
///
/// # Panics
/// If `max_gap_px` is not positive.
pub fn interpolate_points(p0: PixelPoint, p1: PixelPoint, max_gap_px: f64) -> Vec<PixelPoint> {
    assert!(max_gap_px > 0.0, "max_gap_px must be positive, got {max_gap_px}");
    let (dx, dy) = (p1[0] - p0[0], p1[1] - p0[1]);
    let length = dx.hypot(dy);
    if length == 0.0 {
        return vec![p0];
    }
    let segments = (length / max_gap_px).ceil().max(1.0) as usize;
    let mut points = Vec::with_capacity(segments + 1);
    for i in 0..segments {
        let t = i as f64 / segments as f64;
        points.push([p0[0] + dx * t, p0[1] + dy * t]);
    }
    points.push(p1);
    points
}

/// Set of pixels on one slice, accumulated from discs and capsules.
#[derive(Debug, Clone)]
pub struct Coverage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    // inclusive bounding box of set bits; empty when lo > hi
    lo: (usize, usize),
    hi: (usize, usize),
}

impl Coverage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
            lo: (usize::MAX, usize::MAX),
            hi: (0, 0),
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.bits[y * self.width + x]
    }

    pub fn is_empty(&self) -> bool {
        self.lo.0 > self.hi.0
    }

    /// Covered pixels in row-major order.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        for y in self.lo.1..=self.hi.1 {
            for x in self.lo.0..=self.hi.0 {
                if self.bits[y * self.width + x] {
                    out.push((x, y));
                }
            }
        }
        out
    }

    fn mark(&mut self, x: i64, y: i64) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let (x, y) = (x as usize, y as usize);
        self.bits[y * self.width + x] = true;
        self.lo = (self.lo.0.min(x), self.lo.1.min(y));
        self.hi = (self.hi.0.max(x), self.hi.1.max(y));
    }

    fn mark_containing(&mut self, p: PixelPoint) {
        self.mark(p[0].floor() as i64, p[1].floor() as i64);
    }

    /// Pixel range `[lo, hi]` whose centers can lie within `r` of `[a, b]`
    /// on one axis, clipped to `[0, n)`.
    fn span(a: f64, b: f64, r: f64, n: usize) -> Option<(usize, usize)> {
        // center c = i + 0.5 within [min - r, max + r]
        let lo = (a.min(b) - r - 0.5).ceil().max(0.0);
        let hi = (a.max(b) + r - 0.5).floor().min(n as f64 - 1.0);
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    /// Disc of radius `r` around `center`, plus the pixel containing it.
    pub fn add_disc(&mut self, center: PixelPoint, r: f64) {
        self.mark_containing(center);
        let (Some((x0, x1)), Some((y0, y1))) = (
            Self::span(center[0], center[0], r, self.width),
            Self::span(center[1], center[1], r, self.height),
        ) else {
            return;
        };
        let r2 = r * r;
        for y in y0..=y1 {
            let dy = y as f64 + 0.5 - center[1];
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - center[0];
                if dx * dx + dy * dy <= r2 {
                    self.mark(x as i64, y as i64);
                }
            }
        }
    }

    /// Brush of radius `r` swept along segment `a`→`b`.
    pub fn add_capsule(&mut self, a: PixelPoint, b: PixelPoint, r: f64) {
        if r < FOOTPRINT_IMPLIED_RADIUS {
            self.add_path_footprint(a, b);
        }
        let (Some((x0, x1)), Some((y0, y1))) = (
            Self::span(a[0], b[0], r, self.width),
            Self::span(a[1], b[1], r, self.height),
        ) else {
            return;
        };
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let r2 = r * r;
        for y in y0..=y1 {
            let cy = y as f64 + 0.5;
            for x in x0..=x1 {
                let cx = x as f64 + 0.5;
                let t = if len2 > 0.0 {
                    (((cx - a[0]) * dx + (cy - a[1]) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (ex, ey) = (cx - (a[0] + t * dx), cy - (a[1] + t * dy));
                if ex * ex + ey * ey <= r2 {
                    self.mark(x as i64, y as i64);
                }
            }
        }
    }

    /// Marks every pixel whose half-open square the segment touches. The
    /// containing pixel only changes where the path crosses an integer grid
    /// line, so it is sampled at each crossing and between crossings.
    fn add_path_footprint(&mut self, a: PixelPoint, b: PixelPoint) {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let mut breaks: Vec<(f64, PixelPoint)> = vec![(0.0, a), (1.0, b)];
        if dx != 0.0 {
            let (lo, hi) = (a[0].min(b[0]).ceil() as i64, a[0].max(b[0]).floor() as i64);
            for k in lo..=hi {
                let t = (k as f64 - a[0]) / dx;
                if t > 0.0 && t < 1.0 {
                    breaks.push((t, [k as f64, a[1] + t * dy]));
                }
            }
        }
        if dy != 0.0 {
            let (lo, hi) = (a[1].min(b[1]).ceil() as i64, a[1].max(b[1]).floor() as i64);
            for k in lo..=hi {
                let t = (k as f64 - a[1]) / dy;
                if t > 0.0 && t < 1.0 {
                    breaks.push((t, [a[0] + t * dx, k as f64]));
                }
            }
        }
        breaks.sort_by(|p, q| p.0.total_cmp(&q.0));
        for (i, &(t, p)) in breaks.iter().enumerate() {
            self.mark_containing(p);
            if let Some(&(t_next, _)) = breaks.get(i + 1) {
                if t_next > t {
                    let m = 0.5 * (t + t_next);
                    self.mark_containing([a[0] + m * dx, a[1] + m * dy]);
                }
            }
        }
    }
}

/// Writes `mode`'s label into every covered pixel that differs from it.
fn apply_coverage(
    mask: &mut MaskVolume,
    slice: SliceRef,
    coverage: &Coverage,
    mode: BrushMode,
    stroke_id: u64,
) -> EditRecord {
    let target = mode.target_label();
    let mut changes = Vec::new();
    for (x, y) in coverage.pixels() {
        let old = mask.get_pixel(slice, x, y);
        if old != target {
            mask.set_pixel(slice, x, y, target);
            changes.push(PixelChange {
                x: x as u32,
                y: y as u32,
                old,
                new: target,
            });
        }
    }
    EditRecord {
        slice,
        stroke_id,
        changes,
    }
}

/// Paints one brush disc on `slice`.
pub fn stamp_brush(
    mask: &mut MaskVolume,
    slice: SliceRef,
    center: PixelPoint,
    radius_px: f64,
    mode: BrushMode,
) -> Result<EditRecord, AnnotationError> {
    slice.validate(mask.dims())?;
    if !(radius_px >= 0.0) {
        return Err(AnnotationError::InvalidStroke(format!("radius {radius_px}")));
    }
    let (w, h) = slice.axis.slice_dims(mask.dims());
    let mut coverage = Coverage::new(w, h);
    coverage.add_disc(center, radius_px);
    Ok(apply_coverage(mask, slice, &coverage, mode, 0))
}

/// Projects the pressed samples of `stroke` and returns the interpolated
/// pen positions, one list per contiguous run of canvas hits.
pub fn stroke_runs(canvas: &CanvasPlane, stroke: &Stroke) -> Result<Vec<Vec<PixelPoint>>, AnnotationError> {
    let gap = stroke_gap(stroke.radius_px);
    let mut hits: Vec<Vec<PixelPoint>> = Vec::new();
    let mut current: Vec<PixelPoint> = Vec::new();
    for sample in &stroke.samples {
        let hit = if sample.pressed {
            match project_sample(canvas, sample) {
                Ok(hit) => hit,
                Err(AnnotationError::DegenerateRay) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        match hit {
            Some(p) => current.push(p),
            None if !current.is_empty() => hits.push(std::mem::take(&mut current)),
            None => {}
        }
    }
    if !current.is_empty() {
        hits.push(current);
    }

    Ok(hits
        .into_iter()
        .map(|run| {
            let mut points = vec![run[0]];
            for pair in run.windows(2) {
                points.extend(interpolate_points(pair[0], pair[1], gap).into_iter().skip(1));
            }
            points
        })
        .collect())
}

/// Coverage of a whole stroke on its canvas slice.
pub fn stroke_coverage(canvas: &CanvasPlane, stroke: &Stroke) -> Result<Coverage, AnnotationError> {
    let (w, h) = canvas.pixel_dims();
    let mut coverage = Coverage::new(w, h);
    let r = stroke.radius_px;
    for run in stroke_runs(canvas, stroke)? {
        if run.len() == 1 {
            coverage.add_disc(run[0], r);
        }
        for pair in run.windows(2) {
            coverage.add_capsule(pair[0], pair[1], r);
        }
    }
    Ok(coverage)
}

/// Applies a full stroke to the slice bound to `canvas`.
///
/// Released samples and samples that miss the canvas split the stroke; no
/// interpolation happens across a split.
pub fn apply_stroke(mask: &mut MaskVolume, canvas: &CanvasPlane, stroke: &Stroke) -> Result<EditRecord, AnnotationError> {
    canvas.check_bound(mask.dims())?;
    stroke.validate()?;
    let coverage = stroke_coverage(canvas, stroke)?;
    Ok(apply_coverage(mask, canvas.slice(), &coverage, stroke.mode, stroke.id))
}
