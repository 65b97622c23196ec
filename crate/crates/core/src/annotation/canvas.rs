use nalgebra::Vector3;

use crate::error::AnnotationError;
use crate::volume::{Dims, SliceRef, Spacing};

/// A point in slice pixel space. Pixel (i, j) covers `[i, i+1) x [j, j+1)`.
pub type PixelPoint = [f64; 2];

const ORTHO_TOL: f64 = 1e-9;

/// A rectangle in world space showing one slice.
///
/// `u_axis` runs along pixel x, `v_axis` along pixel y, and `origin` is the
/// top-left corner of pixel (0, 0). The drawable side faces `u_axis × v_axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanvasPlane {
    origin: Vector3<f64>,
    u_axis: Vector3<f64>,
    v_axis: Vector3<f64>,
    width_mm: f64,
    height_mm: f64,
    slice: SliceRef,
    pixel_dims: (usize, usize),
}

impl CanvasPlane {
    pub fn new(
        origin: [f64; 3],
        u_axis: [f64; 3],
        v_axis: [f64; 3],
        width_mm: f64,
        height_mm: f64,
        slice: SliceRef,
        pixel_dims: (usize, usize),
    ) -> Result<Self, AnnotationError> {
        let u = Vector3::from(u_axis);
        let v = Vector3::from(v_axis);
        let invalid = |m: &str| Err(AnnotationError::InvalidCanvas(m.to_string()));
        if (u.norm() - 1.0).abs() > ORTHO_TOL || (v.norm() - 1.0).abs() > ORTHO_TOL {
            return invalid("u_axis and v_axis must be unit vectors");
        }
        if u.dot(&v).abs() > ORTHO_TOL {
            return invalid("u_axis and v_axis must be orthogonal");
        }
        if !(width_mm > 0.0 && height_mm > 0.0) || !width_mm.is_finite() || !height_mm.is_finite() {
            return invalid("physical extent must be positive");
        }
        if pixel_dims.0 == 0 || pixel_dims.1 == 0 {
            return invalid("pixel dims must be positive");
        }
        if origin.iter().any(|c| !c.is_finite()) {
            return invalid("origin must be finite");
        }
        Ok(Self {
            origin: Vector3::from(origin),
            u_axis: u,
            v_axis: v,
            width_mm,
            height_mm,
            slice,
            pixel_dims,
        })
    }

    /// Axis-aligned canvas showing `slice` at its physical size, with the
    /// origin at world (0, 0, 0).
    pub fn for_slice(dims: Dims, spacing: Spacing, slice: SliceRef) -> Self {
        let (pw, ph) = slice.axis.slice_dims(dims);
        let (su, sv) = match slice.axis {
            crate::volume::Axis::Axial => (spacing[0], spacing[1]),
            crate::volume::Axis::Coronal => (spacing[0], spacing[2]),
            crate::volume::Axis::Sagittal => (spacing[1], spacing[2]),
        };
        Self {
            origin: Vector3::zeros(),
            u_axis: Vector3::x(),
            v_axis: Vector3::y(),
            width_mm: pw as f64 * su,
            height_mm: ph as f64 * sv,
            slice,
            pixel_dims: (pw, ph),
        }
    }

    /// Checks `pixel_dims` against the bound slice of a volume with `dims`.
    pub fn check_bound(&self, dims: Dims) -> Result<(), AnnotationError> {
        self.slice.validate(dims)?;
        let expected = self.slice.axis.slice_dims(dims);
        if expected != self.pixel_dims {
            return Err(AnnotationError::InvalidCanvas(format!(
                "pixel dims {:?} do not match {} slice dims {:?}",
                self.pixel_dims, self.slice.axis, expected
            )));
        }
        Ok(())
    }

    pub fn slice(&self) -> SliceRef {
        self.slice
    }

    pub fn pixel_dims(&self) -> (usize, usize) {
        self.pixel_dims
    }

    pub fn width_mm(&self) -> f64 {
        self.width_mm
    }

    pub fn height_mm(&self) -> f64 {
        self.height_mm
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin.into()
    }

    pub fn u_axis(&self) -> [f64; 3] {
        self.u_axis.into()
    }

    pub fn v_axis(&self) -> [f64; 3] {
        self.v_axis.into()
    }

    /// Front-facing unit normal.
    pub fn normal(&self) -> [f64; 3] {
        self.u_axis.cross(&self.v_axis).into()
    }

    /// World position of pixel-space point `p`.
    pub fn world_point(&self, p: PixelPoint) -> [f64; 3] {
        let u = p[0] / self.pixel_dims.0 as f64 * self.width_mm;
        let v = p[1] / self.pixel_dims.1 as f64 * self.height_mm;
        (self.origin + self.u_axis * u + self.v_axis * v).into()
    }
}

/// One tracked stylus pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StylusSample {
    pub tip: [f64; 3],
    direction: [f64; 3],
    pub timestamp_ms: f64,
    pub pressed: bool,
}

impl StylusSample {
    /// `direction` must be unit length within 1e-9.
    pub fn new(tip: [f64; 3], direction: [f64; 3], timestamp_ms: f64, pressed: bool) -> Result<Self, AnnotationError> {
        let n = Vector3::from(direction).norm();
        if (n - 1.0).abs() > ORTHO_TOL {
            return Err(AnnotationError::InvalidStroke(format!(
                "ray direction has length {n}, expected 1"
            )));
        }
        if tip.iter().any(|c| !c.is_finite()) {
            return Err(AnnotationError::InvalidStroke("tip must be finite".into()));
        }
        Ok(Self {
            tip,
            direction,
            timestamp_ms,
            pressed,
        })
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }
}

/// Casts the stylus ray onto the canvas.
///
/// Returns the hit in pixel space, `Ok(None)` for misses (outside the
/// rectangle, behind the tip, or from the back side) and
/// `Err(DegenerateRay)` when the ray runs parallel to the plane.
pub fn project_sample(canvas: &CanvasPlane, sample: &StylusSample) -> Result<Option<PixelPoint>, AnnotationError> {
    let normal = canvas.u_axis.cross(&canvas.v_axis);
    let dir = Vector3::from(sample.direction);
    let denom = dir.dot(&normal);
    if denom.abs() < ORTHO_TOL {
        return Err(AnnotationError::DegenerateRay);
    }
    if denom > 0.0 {
        return Ok(None);
    }
    let tip = Vector3::from(sample.tip);
    let t = (canvas.origin - tip).dot(&normal) / denom;
    if t < 0.0 {
        return Ok(None);
    }
    let rel = tip + dir * t - canvas.origin;
    let hit_u = rel.dot(&canvas.u_axis);
    let hit_v = rel.dot(&canvas.v_axis);
    if !(0.0..=canvas.width_mm).contains(&hit_u) || !(0.0..=canvas.height_mm).contains(&hit_v) {
        return Ok(None);
    }
    Ok(Some([
        hit_u / canvas.width_mm * canvas.pixel_dims.0 as f64,
        hit_v / canvas.height_mm * canvas.pixel_dims.1 as f64,
    ]))
}
