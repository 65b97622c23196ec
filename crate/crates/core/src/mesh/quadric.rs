use nalgebra::{Matrix3, Vector3};

use super::{dot, face_normal_raw, norm, Point3, TriangleMesh};

/// Area below which a triangle is considered degenerate (mm²).
pub(crate) const MIN_TRIANGLE_AREA: f64 = 1e-12;
const MIN_SOLVE_DETERMINANT: f64 = 1e-12;

/// Symmetric 4×4 plane-distance quadric, stored as its upper triangle:
/// `[aa, ab, ac, ad, bb, bc, bd, cc, cd, dd]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VertexQuadric {
    pub q: [f64; 10],
}

impl VertexQuadric {
    /// `weight * p p^T` for the plane `n·x + d = 0`, where `n` is a unit normal.
    pub fn from_plane(n: Point3, d: f64, weight: f64) -> Self {
        let [a, b, c] = n;
        Self {
            q: [a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d].map(|v| v * weight),
        }
    }

    /// Plane through `point` with unit normal `n`.
    pub fn from_point_normal(point: Point3, n: Point3, weight: f64) -> Self {
        Self::from_plane(n, -dot(n, point), weight)
    }

    pub fn add(&mut self, other: &VertexQuadric) {
        for (a, b) in self.q.iter_mut().zip(other.q) {
            *a += b;
        }
    }

    pub fn sum(&self, other: &VertexQuadric) -> VertexQuadric {
        let mut out = *self;
        out.add(other);
        out
    }

    /// `[x y z 1] Q [x y z 1]^T`.
    pub fn evaluate(&self, p: Point3) -> f64 {
        let [aa, ab, ac, ad, bb, bc, bd, cc, cd, dd] = self.q;
        let [x, y, z] = p;
        aa * x * x + 2.0 * ab * x * y + 2.0 * ac * x * z + 2.0 * ad * x + bb * y * y + 2.0 * bc * y * z
            + 2.0 * bd * y
            + cc * z * z
            + 2.0 * cd * z
            + dd
    }

    /// The full 4×4 matrix.
    pub fn matrix(&self) -> nalgebra::Matrix4<f64> {
        let [aa, ab, ac, ad, bb, bc, bd, cc, cd, dd] = self.q;
        nalgebra::Matrix4::new(aa, ab, ac, ad, ab, bb, bc, bd, ac, bc, cc, cd, ad, bd, cd, dd)
    }

    /// Minimizer of the quadric when its 3×3 block is well conditioned.
    pub fn minimizer(&self) -> Option<Point3> {
        let [aa, ab, ac, ad, bb, bc, bd, cc, cd, _] = self.q;
        let a = Matrix3::new(aa, ab, ac, ab, bb, bc, ac, bc, cc);
        if a.determinant().abs() <= MIN_SOLVE_DETERMINANT {
            return None;
        }
        let x = a.try_inverse()? * -Vector3::new(ad, bd, cd);
        x.iter().all(|c| c.is_finite()).then(|| [x[0], x[1], x[2]])
    }
}

/// Per-vertex quadrics plus the triangles skipped as degenerate.
#[derive(Debug, Clone)]
pub struct QuadricSet {
    pub quadrics: Vec<VertexQuadric>,
    pub degenerate_triangles: Vec<usize>,
}

/// Sums the area-weighted plane quadric of every incident triangle into
/// each vertex. Zero-area triangles contribute nothing and are listed.
pub fn compute_vertex_quadrics(mesh: &TriangleMesh) -> QuadricSet {
    let mut quadrics = vec![VertexQuadric::default(); mesh.vertex_count()];
    let mut degenerate = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(t);
        let n = face_normal_raw(pts);
        let len = norm(n);
        let area = 0.5 * len;
        if area <= MIN_TRIANGLE_AREA {
            degenerate.push(t);
            continue;
        }
        let unit = n.map(|c| c / len);
        let q = VertexQuadric::from_point_normal(pts[0], unit, area);
        for &v in tri {
            quadrics[v as usize].add(&q);
        }
    }
    QuadricSet {
        quadrics,
        degenerate_triangles: degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseCandidate {
    pub edge: (u32, u32),
    pub cost: f64,
    pub target: Point3,
}

/// Cost and placement for merging `a` and `b`.
///
/// Uses the minimizer of `Qa + Qb` when it exists, otherwise the cheapest of
/// the midpoint, `a` and `b` (in that order on ties).
pub fn collapse_cost(a: u32, b: u32, quadrics: &[VertexQuadric], positions: &[Point3]) -> CollapseCandidate {
    let q = quadrics[a as usize].sum(&quadrics[b as usize]);
    let (pa, pb) = (positions[a as usize], positions[b as usize]);
    let target = q.minimizer().unwrap_or_else(|| {
        let mid = [0, 1, 2].map(|i| 0.5 * (pa[i] + pb[i]));
        let mut best = mid;
        let mut best_cost = q.evaluate(mid);
        for p in [pa, pb] {
            let c = q.evaluate(p);
            if c < best_cost {
                best = p;
                best_cost = c;
            }
        }
        best
    });
    CollapseCandidate {
        edge: (a, b),
        cost: q.evaluate(target).max(0.0),
        target,
    }
}
