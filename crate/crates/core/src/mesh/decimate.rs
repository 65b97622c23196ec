use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use super::quadric::{collapse_cost, CollapseCandidate, compute_vertex_quadrics, VertexQuadric, MIN_TRIANGLE_AREA};
use super::{cross, dot, face_normal_raw, norm, sub, Point3, TriangleMesh};
use crate::error::MeshError;

/// Weight of boundary-preserving planes relative to the mean edge length.
const BOUNDARY_WEIGHT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecimationConfig {
    /// Fraction of triangles to keep, in (0, 1].
    pub target_ratio: f64,
    /// Reject collapses that would change the surface topology.
    pub preserve_topology: bool,
    /// Largest allowed rotation of any surviving face normal, in degrees.
    pub max_normal_flip_deg: f64,
}

impl Default for DecimationConfig {
    fn default() -> Self {
        Self {
            target_ratio: 0.25,
            preserve_topology: true,
            max_normal_flip_deg: 90.0,
        }
    }
}

impl DecimationConfig {
    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(MeshError::InvalidConfig(format!(
                "target ratio {} must lie in (0, 1]",
                self.target_ratio
            )));
        }
        if !(self.max_normal_flip_deg > 0.0 && self.max_normal_flip_deg <= 180.0) {
            return Err(MeshError::InvalidConfig(format!(
                "normal flip limit {} must lie in (0, 180]",
                self.max_normal_flip_deg
            )));
        }
        Ok(())
    }

    /// Triangle budget for a mesh of `triangles` faces.
    pub fn target_count(&self, triangles: usize) -> usize {
        (self.target_ratio * triangles as f64).ceil() as usize
    }
}

/// What a decimation run did, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecimationTrace {
    /// Cost of each accepted collapse.
    pub accepted_costs: Vec<f64>,
    /// Candidates popped but refused by a validity check.
    pub rejected: usize,
    pub target: usize,
    pub achieved: usize,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    cost: f64,
    a: u32,
    b: u32,
    va: u32,
    vb: u32,
    target: Point3,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

struct State<'c> {
    cfg: &'c DecimationConfig,
    pos: Vec<Point3>,
    quad: Vec<VertexQuadric>,
    tris: Vec<[u32; 3]>,
    tri_alive: Vec<bool>,
    vert_tris: Vec<Vec<u32>>,
    version: Vec<u32>,
    alive_tris: usize,
    heap: BinaryHeap<Reverse<Entry>>,
    /// Edges refused by a validity check, waiting for their neighbourhood
    /// to change.
    parked: HashSet<(u32, u32)>,
}

impl State<'_> {
    fn incident(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.vert_tris[v as usize].iter().copied().filter(|&t| self.tri_alive[t as usize])
    }

    /// Sorted, distinct 1-ring of `v`.
    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .incident(v)
            .flat_map(|t| self.tris[t as usize])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// A vertex is on the boundary when some edge at it has one face, i.e.
    /// some ring vertex shows up in only one incident triangle.
    fn is_boundary_vertex(&self, v: u32) -> bool {
        let mut others: Vec<u32> = self
            .incident(v)
            .flat_map(|t| self.tris[t as usize])
            .filter(|&u| u != v)
            .collect();
        others.sort_unstable();
        others.chunk_by(|x, y| x == y).any(|run| run.len() == 1)
    }

    fn edge_faces(&self, a: u32, b: u32) -> Vec<u32> {
        self.incident(a).filter(|&t| self.tris[t as usize].contains(&b)).collect()
    }

    fn push(&mut self, a: u32, b: u32) {
        let (a, b) = (a.min(b), a.max(b));
        let c = collapse_cost(a, b, &self.quad, &self.pos);
        self.heap.push(Reverse(Entry {
            cost: c.cost,
            a,
            b,
            va: self.version[a as usize],
            vb: self.version[b as usize],
            target: c.target,
        }));
    }

    fn valid(&self, a: u32, b: u32, target: Point3) -> bool {
        let shared = self.edge_faces(a, b);
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        if self.cfg.preserve_topology {
            let mut opposite: Vec<u32> = shared
                .iter()
                .flat_map(|&t| self.tris[t as usize])
                .filter(|&u| u != a && u != b)
                .collect();
            opposite.sort_unstable();
            opposite.dedup();
            let common: Vec<u32> = na.iter().copied().filter(|u| nb.binary_search(u).is_ok()).collect();
            if common != opposite {
                return false;
            }
            if shared.len() == 2 && self.is_boundary_vertex(a) && self.is_boundary_vertex(b) {
                return false;
            }
            let merged = na.len() + nb.len() - common.len() - 2;
            if merged < 3 {
                return false;
            }
        }
        let cos_limit = self.cfg.max_normal_flip_deg.to_radians().cos();
        for v in [a, b] {
            for t in self.incident(v) {
                if shared.contains(&t) {
                    continue;
                }
                let tri = self.tris[t as usize];
                let old = tri.map(|i| self.pos[i as usize]);
                let new = tri.map(|i| if i == a || i == b { target } else { self.pos[i as usize] });
                let (n_old, n_new) = (face_normal_raw(old), face_normal_raw(new));
                let len_new = norm(n_new);
                if 0.5 * len_new <= MIN_TRIANGLE_AREA {
                    return false;
                }
                let len_old = norm(n_old);
                if len_old > 0.0 && dot(n_old, n_new) / (len_old * len_new) < cos_limit {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, a: u32, b: u32, target: Point3) {
        let shared = self.edge_faces(a, b);
        for &t in &shared {
            self.tri_alive[t as usize] = false;
            self.alive_tris -= 1;
        }
        let moved: Vec<u32> = self.incident(b).collect();
        for t in moved {
            for i in self.tris[t as usize].iter_mut() {
                if *i == b {
                    *i = a;
                }
            }
            self.vert_tris[a as usize].push(t);
        }
        self.vert_tris[b as usize].clear();
        let alive = &self.tri_alive;
        self.vert_tris[a as usize].retain(|&t| alive[t as usize]);
        self.pos[a as usize] = target;
        let qb = self.quad[b as usize];
        self.quad[a as usize].add(&qb);
        self.version[a as usize] += 1;
        self.version[b as usize] += 1;
        // edges at `a` have new costs; elsewhere in the ring costs are
        // unchanged but validity may not be, so parked edges get another go
        let ring = self.neighbors(a);
        for &n in &ring {
            self.parked.remove(&(a.min(n), a.max(n)));
            self.push(a, n);
        }
        for &v in &ring {
            for n in self.neighbors(v) {
                if n != a && self.parked.remove(&(v.min(n), v.max(n))) {
                    self.push(v, n);
                }
            }
        }
    }

    fn alive_edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .tris
            .iter()
            .zip(&self.tri_alive)
            .filter(|(_, &alive)| alive)
            .flat_map(|(t, _)| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// State handed to a decimation observer just before a collapse is applied.
pub struct CollapseView<'s> {
    state: &'s State<'s>,
    /// The candidate about to be applied.
    pub accepted: CollapseCandidate,
}

impl CollapseView<'_> {
    /// Every current edge with a freshly computed cost and its validity.
    pub fn candidates(&self) -> Vec<(CollapseCandidate, bool)> {
        self.state
            .alive_edges()
            .into_iter()
            .map(|(a, b)| {
                let c = collapse_cost(a, b, &self.state.quad, &self.state.pos);
                (c, self.state.valid(a, b, c.target))
            })
            .collect()
    }

    pub fn alive_triangles(&self) -> usize {
        self.state.alive_tris
    }
}

/// Quadric edge-collapse decimation down to `ceil(target_ratio * T)`
/// triangles. If no further valid collapse exists first, the error carries
/// the best mesh reached.
pub fn decimate(mesh: &TriangleMesh, cfg: &DecimationConfig) -> Result<TriangleMesh, MeshError> {
    decimate_traced(mesh, cfg).0
}

/// [`decimate`] plus a record of accepted collapse costs.
pub fn decimate_traced(
    mesh: &TriangleMesh,
    cfg: &DecimationConfig,
) -> (Result<TriangleMesh, MeshError>, DecimationTrace) {
    decimate_observed(mesh, cfg, |_| {})
}

/// [`decimate_traced`] that also shows `observer` each accepted collapse
/// before it is applied. Meant for auditing; candidate listing is O(E).
pub fn decimate_observed(
    mesh: &TriangleMesh,
    cfg: &DecimationConfig,
    mut observer: impl FnMut(&CollapseView<'_>),
) -> (Result<TriangleMesh, MeshError>, DecimationTrace) {
    let mut trace = DecimationTrace::default();
    if let Err(e) = cfg.validate() {
        return (Err(e), trace);
    }
    let target = cfg.target_count(mesh.triangle_count());
    trace.target = target;
    trace.achieved = mesh.triangle_count();
    if mesh.triangle_count() <= target {
        return (Ok(mesh.clone()), trace);
    }

    let mut quad = compute_vertex_quadrics(mesh).quadrics;
    let edges = mesh.edge_use();
    let mean_edge = if edges.is_empty() {
        0.0
    } else {
        edges
            .keys()
            .map(|&(a, b)| norm(sub(mesh.vertices()[a as usize], mesh.vertices()[b as usize])))
            .sum::<f64>()
            / edges.len() as f64
    };
    // planes through each boundary edge, perpendicular to its face
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if edges[&(a.min(b), a.max(b))] != 1 {
                continue;
            }
            let pts = mesh.triangle_points(t);
            let (pa, pb) = (mesh.vertices()[a as usize], mesh.vertices()[b as usize]);
            let m = cross(sub(pb, pa), face_normal_raw(pts));
            let len = norm(m);
            if len == 0.0 {
                continue;
            }
            let q = VertexQuadric::from_point_normal(pa, m.map(|c| c / len), BOUNDARY_WEIGHT * mean_edge);
            quad[a as usize].add(&q);
            quad[b as usize].add(&q);
        }
    }

    let mut vert_tris = vec![Vec::new(); mesh.vertex_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            vert_tris[v as usize].push(t as u32);
        }
    }
    let mut st = State {
        cfg,
        pos: mesh.vertices().to_vec(),
        quad,
        tris: mesh.triangles().to_vec(),
        tri_alive: vec![true; mesh.triangle_count()],
        vert_tris,
        version: vec![0; mesh.vertex_count()],
        alive_tris: mesh.triangle_count(),
        heap: BinaryHeap::with_capacity(edges.len()),
        parked: HashSet::new(),
    };
    let mut keys: Vec<(u32, u32)> = edges.keys().copied().collect();
    keys.sort_unstable();
    for (a, b) in keys {
        st.push(a, b);
    }

    while st.alive_tris > target {
        let Some(Reverse(e)) = st.heap.pop() else { break };
        if st.version[e.a as usize] != e.va || st.version[e.b as usize] != e.vb {
            continue;
        }
        if !st.valid(e.a, e.b, e.target) {
            trace.rejected += 1;
            st.parked.insert((e.a, e.b));
            continue;
        }
        observer(&CollapseView {
            state: &st,
            accepted: CollapseCandidate {
                edge: (e.a, e.b),
                cost: e.cost,
                target: e.target,
            },
        });
        st.collapse(e.a, e.b, e.target);
        trace.accepted_costs.push(e.cost);
    }

    let kept: Vec<[u32; 3]> = st
        .tris
        .iter()
        .zip(&st.tri_alive)
        .filter(|(_, &alive)| alive)
        .map(|(t, _)| *t)
        .collect();
    let out = compact_in_vertex_order(&st.pos, &kept);
    trace.achieved = out.triangle_count();
    if out.triangle_count() > target {
        let achieved = out.triangle_count();
        return (
            Err(MeshError::TargetUnreachable {
                best: Box::new(out),
                target,
                achieved,
            }),
            trace,
        );
    }
    (Ok(out), trace)
}

/// Keeps referenced vertices in their original relative order.
fn compact_in_vertex_order(pos: &[Point3], tris: &[[u32; 3]]) -> TriangleMesh {
    let mut used = vec![false; pos.len()];
    for t in tris {
        for &i in t {
            used[i as usize] = true;
        }
    }
    let mut remap = vec![u32::MAX; pos.len()];
    let mut vertices = Vec::new();
    for (i, p) in pos.iter().enumerate() {
        if used[i] {
            remap[i] = vertices.len() as u32;
            vertices.push(*p);
        }
    }
    TriangleMesh::new(vertices, tris.iter().map(|t| t.map(|i| remap[i as usize])).collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// UV sphere with `rings` latitude bands and `seg` longitude segments.
    pub(crate) fn uv_sphere(r: f64, rings: u32, seg: u32) -> TriangleMesh {
        use std::f64::consts::PI;
        let mut v = vec![[0.0, 0.0, r]];
        for i in 1..rings {
            let th = PI * i as f64 / rings as f64;
            for j in 0..seg {
                let ph = 2.0 * PI * j as f64 / seg as f64;
                v.push([r * th.sin() * ph.cos(), r * th.sin() * ph.sin(), r * th.cos()]);
            }
        }
        v.push([0.0, 0.0, -r]);
        let south = v.len() as u32 - 1;
        let at = |i: u32, j: u32| 1 + (i - 1) * seg + (j % seg);
        let mut t = Vec::new();
        for j in 0..seg {
            t.push([0, at(1, j), at(1, j + 1)]);
            t.push([south, at(rings - 1, j + 1), at(rings - 1, j)]);
        }
        for i in 1..rings - 1 {
            for j in 0..seg {
                t.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
                t.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
        TriangleMesh::new(v, t)
    }

    #[test]
    fn sphere_fixture_is_closed_and_outward() {
        let s = uv_sphere(1.0, 12, 16);
        assert!(s.is_watertight());
        assert_eq!(s.euler_characteristic(), 2);
        assert!(s.signed_volume() > 0.0);
    }

    #[test]
    fn decimated_sphere_stays_closed() {
        let s = uv_sphere(10.0, 30, 40);
        let cfg = DecimationConfig::default();
        let (res, trace) = decimate_traced(&s, &cfg);
        let d = res.unwrap();
        assert!(d.triangle_count() <= cfg.target_count(s.triangle_count()));
        assert!(d.is_watertight());
        assert_eq!(d.euler_characteristic(), 2);
        assert!(d.signed_volume() > 0.0);
        assert_eq!(trace.achieved, d.triangle_count());
        assert!(trace.accepted_costs.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn ratio_one_is_identity() {
        let s = uv_sphere(2.0, 6, 8);
        let cfg = DecimationConfig {
            target_ratio: 1.0,
            ..Default::default()
        };
        assert_eq!(decimate(&s, &cfg).unwrap(), s);
    }

    #[test]
    fn tetrahedron_cannot_shrink() {
        let t = crate::mesh::tests::tetra();
        match decimate(&t, &DecimationConfig::default()) {
            Err(MeshError::TargetUnreachable { best, target, achieved }) => {
                assert_eq!(target, 1);
                assert_eq!(achieved, 4);
                assert_eq!(*best, t);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_grid_keeps_its_outline() {
        // 8x8 quad grid in z = 0
        let n = 8u32;
        let mut v = Vec::new();
        for y in 0..=n {
            for x in 0..=n {
                v.push([x as f64, y as f64, 0.0]);
            }
        }
        let id = |x: u32, y: u32| y * (n + 1) + x;
        let mut t = Vec::new();
        for y in 0..n {
            for x in 0..n {
                t.push([id(x, y), id(x + 1, y), id(x + 1, y + 1)]);
                t.push([id(x, y), id(x + 1, y + 1), id(x, y + 1)]);
            }
        }
        let m = TriangleMesh::new(v, t);
        let d = decimate(
            &m,
            &DecimationConfig {
                target_ratio: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((d.area() - 64.0).abs() < 1e-9);
        for p in d.vertices() {
            assert!(p[2].abs() < 1e-9);
            assert!((-1e-9..=8.0 + 1e-9).contains(&p[0]) && (-1e-9..=8.0 + 1e-9).contains(&p[1]));
        }
    }

    #[test]
    fn invalid_ratio_rejected() {
        let s = uv_sphere(1.0, 4, 6);
        for r in [0.0, -0.5, 1.5] {
            let cfg = DecimationConfig {
                target_ratio: r,
                ..Default::default()
            };
            assert!(matches!(decimate(&s, &cfg), Err(MeshError::InvalidConfig(_))));
        }
    }
}
