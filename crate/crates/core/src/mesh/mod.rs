//! Indexed triangle meshes and the optimizations applied before display:
//! vertex deduplication, quadric edge-collapse decimation and distance-based
//! level of detail. Export writers live in [`io`].

mod decimate;
mod dedupe;
pub mod io;
mod lod;
mod quadric;

use std::collections::HashMap;

pub use decimate::{decimate, decimate_observed, decimate_traced, CollapseView, DecimationConfig, DecimationTrace};
pub use dedupe::dedupe_vertices;
pub use lod::{build_lod_ladder, select_lod, LodLadder, LodLevel, LodSummary};
pub use quadric::{collapse_cost, compute_vertex_quadrics, CollapseCandidate, QuadricSet, VertexQuadric};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    normals: Option<Vec<Point3>>,
}

impl TriangleMesh {
    /// # Panics
    /// If a triangle references a missing vertex or repeats an index.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Self {
        let n = vertices.len() as u32;
        for t in &triangles {
            assert!(t.iter().all(|&i| i < n), "triangle {t:?} indexes past {n} vertices");
            assert!(t[0] != t[1] && t[1] != t[2] && t[0] != t[2], "triangle {t:?} repeats a vertex");
        }
        Self {
            vertices,
            triangles,
            normals: None,
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> Option<&[Point3]> {
        self.normals.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_points(&self, t: usize) -> [Point3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Adds area-weighted unit vertex normals. Vertices without a usable
    /// incident face get `[0, 0, 1]`.
    pub fn with_normals(mut self) -> Self {
        let mut acc = vec![[0.0; 3]; self.vertices.len()];
        for t in 0..self.triangles.len() {
            let n = face_normal_raw(self.triangle_points(t));
            for &i in &self.triangles[t] {
                for a in 0..3 {
                    acc[i as usize][a] += n[a];
                }
            }
        }
        let normals = acc
            .into_iter()
            .map(|n| {
                let len = norm(n);
                if len > 0.0 {
                    n.map(|c| c / len)
                } else {
                    [0.0, 0.0, 1.0]
                }
            })
            .collect();
        self.normals = Some(normals);
        self
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| triangle_area(self.triangle_points(t))).sum()
    }

    /// Signed enclosed volume (divergence theorem); positive when triangles
    /// face outward.
    pub fn signed_volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Undirected edges with their incident triangle counts.
    pub fn edge_use(&self) -> HashMap<(u32, u32), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Every edge borders exactly two triangles, with opposite orientation.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// V - E + F over the vertices that triangles actually use.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_use().len() as i64 + self.triangles.len() as i64
    }

    /// Splits into edge-connected components, each with compact indices.
    pub fn components(&self) -> Vec<TriangleMesh> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for t in &self.triangles {
            for k in 1..3 {
                let (a, b) = (find(&mut parent, t[0] as usize), find(&mut parent, t[k] as usize));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: Vec<(usize, Vec<[u32; 3]>)> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for t in &self.triangles {
            let root = find(&mut parent, t[0] as usize);
            let g = *slot.entry(root).or_insert_with(|| {
                groups.push((root, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(*t);
        }
        groups.into_iter().map(|(_, tris)| self.submesh(&tris)).collect()
    }

    /// Mesh made of `tris` (indices into this mesh), reindexed compactly.
    pub fn submesh(&self, tris: &[[u32; 3]]) -> TriangleMesh {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut vertices = Vec::new();
        let triangles = tris
            .iter()
            .map(|t| {
                t.map(|i| {
                    *map.entry(i).or_insert_with(|| {
                        vertices.push(self.vertices[i as usize]);
                        (vertices.len() - 1) as u32
                    })
                })
            })
            .collect();
        TriangleMesh::new(vertices, triangles)
    }

    /// Triangles as position triples rotated so the smallest vertex comes
    /// first, sorted. Two meshes with equal output hold the same triangle
    /// multiset regardless of indexing or order.
    pub fn canonical_triangles(&self) -> Vec<[[u64; 3]; 3]> {
        let mut out: Vec<[[u64; 3]; 3]> = (0..self.triangles.len())
            .map(|t| {
                let p = self.triangle_points(t).map(|v| v.map(f64::to_bits));
                let k = (0..3).min_by_key(|&k| p[k]).unwrap();
                [p[k], p[(k + 1) % 3], p[(k + 2) % 3]]
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Drops vertices no triangle references.
    pub fn compact(&self) -> TriangleMesh {
        let mut out = self.submesh(&self.triangles);
        if let Some(normals) = &self.normals {
            // submesh preserves first-use order; rebuild normals the same way
            let mut seen = vec![false; self.vertices.len()];
            let mut ns = Vec::new();
            for t in &self.triangles {
                for &i in t {
                    if !seen[i as usize] {
                        seen[i as usize] = true;
                        ns.push(normals[i as usize]);
                    }
                }
            }
            out.normals = Some(ns);
        }
        out
    }

    pub(crate) fn set_normals(&mut self, normals: Option<Vec<Point3>>) {
        self.normals = normals;
    }
}

#[inline]
pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

/// Unnormalized normal; its length is twice the triangle area.
#[inline]
pub(crate) fn face_normal_raw([a, b, c]: [Point3; 3]) -> Point3 {
    cross(sub(b, a), sub(c, a))
}

#[inline]
pub fn triangle_area(p: [Point3; 3]) -> f64 {
    0.5 * norm(face_normal_raw(p))
}
