//! Reference implementations written independently of `voxelink-core`,
//! used to check its output. They favour obviousness over speed.

use std::collections::{BTreeSet, HashMap};

use voxelink_core::{MaskVolume, TriangleMesh};

pub type P3 = [f64; 3];

pub fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn unit(a: P3) -> P3 {
    let n = dot(a, a).sqrt();
    a.map(|c| c / n)
}

fn add_scaled(a: P3, b: P3, s: f64) -> P3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// Trilinear interpolation of the 0/1 labels of `mask` at world point `p`
/// (voxel centres at `index * spacing`), with everything outside the grid 0.
pub fn trilinear_label(mask: &MaskVolume, spacing: P3, p: P3) -> f64 {
    let d = mask.dims();
    let at = |x: i64, y: i64, z: i64| -> f64 {
        let inside = x >= 0 && y >= 0 && z >= 0 && x < d[0] as i64 && y < d[1] as i64 && z < d[2] as i64;
        if inside && mask.get(x as usize, y as usize, z as usize) == 255 {
            1.0
        } else {
            0.0
        }
    };
    let c = [0, 1, 2].map(|a| p[a] / spacing[a]);
    let f = c.map(f64::floor);
    let t = [0, 1, 2].map(|a| c[a] - f[a]);
    let mut acc = 0.0;
    for corner in 0..8 {
        let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
        let w: f64 = (0..3).map(|a| if o[a] == 1 { t[a] } else { 1.0 - t[a] }).product();
        acc += w * at(f[0] as i64 + o[0] as i64, f[1] as i64 + o[1] as i64, f[2] as i64 + o[2] as i64);
    }
    acc
}

/// True when every undirected edge is used by exactly two triangles.
pub fn every_edge_twice(mesh: &TriangleMesh) -> bool {
    let mut uses: HashMap<(u32, u32), u32> = HashMap::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *uses.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    uses.values().all(|&n| n == 2)
}

/// Euler characteristic V - E + F of each connected piece, where triangles
/// are connected through shared vertices.
pub fn component_euler(mesh: &TriangleMesh) -> Vec<i64> {
    let n = mesh.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for t in mesh.triangles() {
        for k in 1..3 {
            let (a, b) = (find(&mut parent, t[0] as usize), find(&mut parent, t[k] as usize));
            parent[a] = b;
        }
    }
    let mut verts: HashMap<usize, BTreeSet<u32>> = HashMap::new();
    let mut edges: HashMap<usize, BTreeSet<(u32, u32)>> = HashMap::new();
    let mut faces: HashMap<usize, i64> = HashMap::new();
    for t in mesh.triangles() {
        let root = find(&mut parent, t[0] as usize);
        *faces.entry(root).or_default() += 1;
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            verts.entry(root).or_default().insert(a);
            edges.entry(root).or_default().insert((a.min(b), a.max(b)));
        }
    }
    let mut out: Vec<i64> = faces
        .iter()
        .map(|(root, &f)| verts[root].len() as i64 - edges[root].len() as i64 + f)
        .collect();
    out.sort_unstable();
    out
}

/// Enclosed volume by the divergence theorem.
pub fn enclosed_volume(mesh: &TriangleMesh) -> f64 {
    (0..mesh.triangle_count())
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            dot(a, cross(b, c)) / 6.0
        })
        .sum()
}

pub fn surface_area(mesh: &TriangleMesh) -> f64 {
    (0..mesh.triangle_count())
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            let n = cross(sub(b, a), sub(c, a));
            dot(n, n).sqrt() / 2.0
        })
        .sum()
}

/// Triangles as corner positions, each rotated to start at its smallest
/// corner (winding kept), sorted. Two meshes describe the same oriented
/// surface exactly when these lists are equal.
pub fn triangle_multiset(mesh: &TriangleMesh) -> Vec<[[u64; 3]; 3]> {
    let mut out: Vec<[[u64; 3]; 3]> = (0..mesh.triangle_count())
        .map(|t| {
            let p = mesh.triangle_points(t).map(|v| v.map(f64::to_bits));
            let k = (0..3).min_by_key(|&i| p[i]).unwrap();
            [p[k], p[(k + 1) % 3], p[(k + 2) % 3]]
        })
        .collect();
    out.sort_unstable();
    out
}

/// Closest point on triangle `abc` to `p`, by walking its Voronoi regions.
pub fn closest_on_triangle(p: P3, a: P3, b: P3, c: P3) -> P3 {
    let (ab, ac, ap) = (sub(b, a), sub(c, a), sub(p, a));
    let (d1, d2) = (dot(ab, ap), dot(ac, ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let (d3, d4) = (dot(ab, bp), dot(ac, bp));
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return add_scaled(a, ab, d1 / (d1 - d3));
    }
    let cp = sub(p, c);
    let (d5, d6) = (dot(ab, cp), dot(ac, cp));
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return add_scaled(a, ac, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return add_scaled(b, sub(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    add_scaled(add_scaled(a, ab, vb * denom), ac, vc * denom)
}

/// Distance from `p` to the nearest triangle of `mesh`.
pub fn distance_to_mesh(p: P3, mesh: &TriangleMesh) -> f64 {
    (0..mesh.triangle_count())
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            let d = sub(p, closest_on_triangle(p, a, b, c));
            dot(d, d)
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Vertices plus the centroid and edge midpoints of every triangle.
pub fn surface_samples(mesh: &TriangleMesh) -> Vec<P3> {
    let mut out = mesh.vertices().to_vec();
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle_points(t);
        out.push([0, 1, 2].map(|i| (a[i] + b[i] + c[i]) / 3.0));
        for (u, v) in [(a, b), (b, c), (c, a)] {
            out.push([0, 1, 2].map(|i| (u[i] + v[i]) / 2.0));
        }
    }
    out
}

/// Symmetric Hausdorff distance estimated from surface samples of both
/// meshes. Uses every available thread.
pub fn sampled_hausdorff(a: &TriangleMesh, b: &TriangleMesh) -> f64 {
    let one_way = |from: &TriangleMesh, to: &TriangleMesh| -> f64 {
        let pts = surface_samples(from);
        let threads = std::thread::available_parallelism().map_or(4, |n| n.get());
        let chunk = pts.len().div_ceil(threads).max(1);
        std::thread::scope(|s| {
            let handles: Vec<_> = pts
                .chunks(chunk)
                .map(|c| s.spawn(move || c.iter().map(|&p| distance_to_mesh(p, to)).fold(0.0, f64::max)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).fold(0.0, f64::max)
        })
    };
    one_way(a, b).max(one_way(b, a))
}

/// Closed latitude/longitude sphere centred at the origin: two poles plus
/// `rings - 1` latitude circles of `segments` vertices, wound outward.
pub fn uv_sphere(r: f64, rings: u32, segments: u32) -> TriangleMesh {
    use std::f64::consts::PI;
    let mut v = vec![[0.0, 0.0, r]];
    for i in 1..rings {
        let th = PI * i as f64 / rings as f64;
        for j in 0..segments {
            let ph = 2.0 * PI * j as f64 / segments as f64;
            v.push([r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos()]);
        }
    }
    v.push([0.0, 0.0, -r]);
    let south = v.len() as u32 - 1;
    let at = |i: u32, j: u32| 1 + (i - 1) * segments + j % segments;
    let mut t = Vec::new();
    for j in 0..segments {
        t.push([0, at(1, j), at(1, j + 1)]);
        t.push([south, at(rings - 1, j + 1), at(rings - 1, j)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            t.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            t.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriangleMesh::new(v, t)
}

pub fn seg_dist2(c: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((c[0] - a[0]) * dx + (c[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (ex, ey) = (c[0] - a[0] - t * dx, c[1] - a[1] - t * dy);
    ex * ex + ey * ey
}

/// Does the closed segment `a`-`b` meet the half-open square
/// `[i, i+1) x [j, j+1)`? Parametric clipping, one axis at a time.
pub fn seg_hits_square(a: [f64; 2], b: [f64; 2], i: f64, j: f64) -> bool {
    let (mut lo, mut lo_closed, mut hi, mut hi_closed) = (0.0f64, true, 1.0f64, true);
    for (p, d, edge) in [(a[0], b[0] - a[0], i), (a[1], b[1] - a[1], j)] {
        if d == 0.0 {
            if !(p >= edge && p < edge + 1.0) {
                return false;
            }
            continue;
        }
        let (enter, exit) = ((edge - p) / d, (edge + 1.0 - p) / d);
        let (l, lc, h, hc) = if d > 0.0 { (enter, true, exit, false) } else { (exit, false, enter, true) };
        if l > lo || (l == lo && !lc) {
            lo = l;
            lo_closed = lc && lo_closed;
        }
        if h < hi || (h == hi && !hc) {
            hi = h;
            hi_closed = hc && hi_closed;
        }
    }
    lo < hi || (lo == hi && lo_closed && hi_closed)
}

/// Pixels of a `pw` x `ph` canvas whose centre lies within `r` of a run's
/// polyline, or whose square the polyline crosses.
pub fn rasterize_runs(pw: usize, ph: usize, runs: &[Vec<[f64; 2]>], r: f64) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for run in runs {
        let segs: Vec<([f64; 2], [f64; 2])> = if run.len() == 1 {
            vec![(run[0], run[0])]
        } else {
            run.windows(2).map(|w| (w[0], w[1])).collect()
        };
        for y in 0..ph {
            for x in 0..pw {
                let c = [x as f64 + 0.5, y as f64 + 0.5];
                if segs
                    .iter()
                    .any(|&(a, b)| seg_dist2(c, a, b) <= r * r || seg_hits_square(a, b, x as f64, y as f64))
                {
                    out.insert((x, y));
                }
            }
        }
    }
    out
}

/// A canvas placed anywhere in space.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub origin: P3,
    pub u: P3,
    pub v: P3,
    pub w_mm: f64,
    pub h_mm: f64,
    pub pw: usize,
    pub ph: usize,
}

impl Pose {
    pub fn world(&self, px: f64, py: f64) -> P3 {
        let (a, b) = (px / self.pw as f64 * self.w_mm, py / self.ph as f64 * self.h_mm);
        [0, 1, 2].map(|i| self.origin[i] + a * self.u[i] + b * self.v[i])
    }

    /// Pixel hit by a ray from `tip` along `dir`, if it meets the front of
    /// the canvas inside its bounds.
    pub fn project(&self, tip: P3, dir: P3) -> Option<[f64; 2]> {
        let n = cross(self.u, self.v);
        let denom = dot(dir, n);
        if denom >= 0.0 || denom.abs() < 1e-9 {
            return None;
        }
        let t = dot(sub(self.origin, tip), n) / denom;
        if t < 0.0 {
            return None;
        }
        let hit = sub(add_scaled(tip, dir, t), self.origin);
        let (a, b) = (dot(hit, self.u), dot(hit, self.v));
        if a < 0.0 || a > self.w_mm || b < 0.0 || b > self.h_mm {
            return None;
        }
        Some([a / self.w_mm * self.pw as f64, b / self.h_mm * self.ph as f64])
    }

    /// Splits pressed, on-canvas samples into runs; anything else breaks a run.
    pub fn runs(&self, samples: &[(P3, P3, bool)]) -> Vec<Vec<[f64; 2]>> {
        let mut runs = Vec::new();
        let mut cur = Vec::new();
        for &(tip, dir, pressed) in samples {
            match pressed.then(|| self.project(tip, dir)).flatten() {
                Some(p) => cur.push(p),
                None => {
                    if !cur.is_empty() {
                        runs.push(std::mem::take(&mut cur));
                    }
                }
            }
        }
        if !cur.is_empty() {
            runs.push(cur);
        }
        runs
    }
}
