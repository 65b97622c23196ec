//! Marching cubes over the zero-padded lattice.
//!
//! A grid of `nx × ny × nz` voxels is surrounded by one layer of zero
//! density, giving `(nx+2)(ny+2)(nz+2)` lattice points and
//! `(nx+1)(ny+1)(nz+1)` cubes. Cube `(cx, cy, cz)` spans lattice points
//! `cx..=cx+1` etc., and lattice point `p` is voxel `p - 1`. Every surface
//! vertex lies on a lattice edge and is keyed by that edge, so neighbouring
//! cubes share vertices and the output is an indexed mesh.

use std::collections::{BTreeMap, HashMap};

use super::density::DensityGrid;
use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRIANGLES};
use super::{CancelToken, ExtractionProgress, McConfig, VoxelBox};
use crate::error::ExtractError;
use crate::mesh::TriangleMesh;
use crate::volume::{Dims, Spacing};

/// Case index of a cube: bit k set when corner k is strictly above `iso`.
#[inline]
fn cube_case(d: &[f64; 8], iso: f64) -> usize {
    let mut case = 0;
    for (k, &v) in d.iter().enumerate() {
        if v > iso {
            case |= 1 << k;
        }
    }
    case
}

/// Table triangles for `case`, wound so that normals face away from the
/// inside (dense) region.
#[inline]
fn case_triangles(case: usize) -> impl Iterator<Item = [usize; 3]> {
    TRIANGLES[case]
        .chunks_exact(3)
        .take_while(|t| t[0] >= 0)
        .map(|t| [t[0] as usize, t[2] as usize, t[1] as usize])
}

/// Triangulates a single cell.
///
/// Corners follow `tables::CORNER_OFFSETS`: corner k sits at offset
/// `(k&1, (k>>1)&1, (k>>2)&1)` with corners 2/3 and 6/7 swapped, i.e. going
/// round each face in order. A corner exactly at `iso` counts as outside.
pub fn march_cube(corner_densities: &[f64; 8], corner_positions: &[[f64; 3]; 8], iso: f64) -> Vec<[[f64; 3]; 3]> {
    let case = cube_case(corner_densities, iso);
    let vertex = |e: usize| {
        let [a, b] = EDGE_CORNERS[e];
        let (da, db) = (corner_densities[a], corner_densities[b]);
        let t = (iso - da) / (db - da);
        let (pa, pb) = (corner_positions[a], corner_positions[b]);
        [0, 1, 2].map(|i| pa[i] + t * (pb[i] - pa[i]))
    };
    case_triangles(case).map(|t| t.map(vertex)).collect()
}

#[derive(Debug, Clone, Copy)]
struct Lattice {
    dims: Dims,
    /// Lattice points per axis.
    points: [usize; 3],
    /// Cubes per axis.
    cubes: [usize; 3],
}

impl Lattice {
    fn new(dims: Dims) -> Self {
        Self {
            dims,
            points: dims.map(|d| d + 2),
            cubes: dims.map(|d| d + 1),
        }
    }

    fn cube_total(&self) -> u64 {
        self.cubes.iter().map(|&c| c as u64).product()
    }

    #[inline]
    fn cube_id(&self, c: [usize; 3]) -> u64 {
        (c[0] + self.cubes[0] * (c[1] + self.cubes[1] * c[2])) as u64
    }

    #[inline]
    fn edge_key(&self, p: [usize; 3], axis: usize) -> u64 {
        ((p[0] + self.points[0] * (p[1] + self.points[1] * p[2])) as u64) * 3 + axis as u64
    }

    #[inline]
    fn decode_edge(&self, key: u64) -> ([usize; 3], usize) {
        let axis = (key % 3) as usize;
        let mut rest = (key / 3) as usize;
        let x = rest % self.points[0];
        rest /= self.points[0];
        let y = rest % self.points[1];
        let z = rest / self.points[1];
        ([x, y, z], axis)
    }

    /// Cubes touching any voxel of `region`, as a half-open cube box.
    fn cubes_touching(&self, region: &VoxelBox) -> ([usize; 3], [usize; 3]) {
        let lo = region.lo;
        let hi = [0, 1, 2].map(|a| (region.hi[a] + 1).min(self.cubes[a]));
        (lo, hi)
    }
}

/// Triangles of cube `c` as lattice-edge keys.
#[inline]
fn march_cell(grid: &DensityGrid, lattice: &Lattice, iso: f64, c: [usize; 3], out: &mut Vec<[u64; 3]>) {
    let mut d = [0f64; 8];
    for (k, o) in CORNER_OFFSETS.iter().enumerate() {
        d[k] = f64::from(grid.padded([c[0] + o[0], c[1] + o[1], c[2] + o[2]]));
    }
    let case = cube_case(&d, iso);
    if case == 0 || case == 255 {
        return;
    }
    let key = |e: usize| {
        let [a, b] = EDGE_CORNERS[e];
        let (oa, ob) = (CORNER_OFFSETS[a], CORNER_OFFSETS[b]);
        let axis = (0..3).find(|&i| oa[i] != ob[i]).expect("edge corners differ on one axis");
        let low = [0, 1, 2].map(|i| c[i] + oa[i].min(ob[i]));
        lattice.edge_key(low, axis)
    };
    for t in case_triangles(case) {
        out.push(t.map(key));
    }
}

/// Outcome of [`ExtractionState::update_observed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionUpdate {
    /// Cubes re-marched.
    Done(u64),
    Cancelled(ExtractionProgress),
}

/// Per-cube triangle store behind incremental re-extraction.
#[derive(Debug, Clone)]
pub struct ExtractionState {
    lattice: Lattice,
    spacing: Spacing,
    iso: f64,
    cells: BTreeMap<u64, Vec<[u64; 3]>>,
    triangle_count: usize,
    last_remarched: u64,
}

impl ExtractionState {
    /// Marches every cube of `grid` in x-fastest order, reporting progress
    /// after each `yield_interval` cubes. On cancellation the partially
    /// filled state comes back in the error position.
    pub fn build(
        grid: &DensityGrid,
        config: &McConfig,
        on_progress: &mut dyn FnMut(ExtractionProgress),
        cancel: &CancelToken,
    ) -> Result<Self, (Self, ExtractionProgress)> {
        let lattice = Lattice::new(grid.dims());
        let mut state = Self {
            lattice,
            spacing: grid.spacing(),
            iso: config.iso_level,
            cells: BTreeMap::new(),
            triangle_count: 0,
            last_remarched: 0,
        };
        let total = lattice.cube_total();
        let interval = config.yield_interval.max(1) as u64;
        let mut done = 0u64;
        let mut scratch = Vec::with_capacity(5);
        let progress = |done: u64, tris: usize, cancelled: bool| ExtractionProgress {
            cubes_done: done,
            cubes_total: total,
            partial_triangles: tris as u64,
            cancelled,
        };
        let mut last_reported = u64::MAX;
        for cz in 0..lattice.cubes[2] {
            for cy in 0..lattice.cubes[1] {
                for cx in 0..lattice.cubes[0] {
                    let c = [cx, cy, cz];
                    march_cell(grid, &lattice, state.iso, c, &mut scratch);
                    if !scratch.is_empty() {
                        state.triangle_count += scratch.len();
                        state.cells.insert(lattice.cube_id(c), std::mem::take(&mut scratch));
                    }
                    done += 1;
                    if done % interval == 0 {
                        on_progress(progress(done, state.triangle_count, false));
                        last_reported = done;
                        if cancel.is_cancelled() {
                            let p = progress(done, state.triangle_count, true);
                            on_progress(p);
                            return Err((state, p));
                        }
                    }
                }
            }
        }
        if last_reported != done {
            on_progress(progress(done, state.triangle_count, false));
        }
        state.last_remarched = done;
        Ok(state)
    }

    pub fn dims(&self) -> Dims {
        self.lattice.dims
    }

    pub fn triangle_count(&self) -> usize {
        self.triangle_count
    }

    /// Cubes marched by the most recent build or update.
    pub fn last_remarched(&self) -> u64 {
        self.last_remarched
    }

    /// Re-marches the cubes touching `changed` (the voxel box itself plus
    /// the one-cube rim that shares its corners). `grid` must already hold
    /// the new densities.
    pub fn update(&mut self, grid: &DensityGrid, changed: VoxelBox) -> Result<u64, ExtractError> {
        match self.update_observed(grid, changed, usize::MAX, &mut |_| {}, &CancelToken::new())? {
            RegionUpdate::Done(n) => Ok(n),
            RegionUpdate::Cancelled(_) => unreachable!("a fresh token is never cancelled"),
        }
    }

    /// [`update`](Self::update) with progress after every `yield_interval`
    /// re-marched cubes and a cancellation check at each report.
    ///
    /// A cancelled update leaves some cubes refreshed and others stale.
    /// Re-running it over the same box (or a superset) makes the state
    /// consistent again, since re-marching a cube is idempotent.
    pub fn update_observed(
        &mut self,
        grid: &DensityGrid,
        changed: VoxelBox,
        yield_interval: usize,
        on_progress: &mut dyn FnMut(ExtractionProgress),
        cancel: &CancelToken,
    ) -> Result<RegionUpdate, ExtractError> {
        if grid.dims() != self.lattice.dims {
            return Err(ExtractError::GridMismatch {
                grid: grid.dims(),
                state: self.lattice.dims,
            });
        }
        if !changed.within(self.lattice.dims) {
            return Err(ExtractError::BoxOutOfBounds(changed.lo, changed.hi));
        }
        self.last_remarched = 0;
        if changed.is_empty() {
            on_progress(ExtractionProgress {
                cubes_done: 0,
                cubes_total: 0,
                partial_triangles: self.triangle_count as u64,
                cancelled: false,
            });
            return Ok(RegionUpdate::Done(0));
        }
        let lattice = self.lattice;
        let (lo, hi) = lattice.cubes_touching(&changed);
        let total = (0..3).map(|a| (hi[a] - lo[a]) as u64).product::<u64>();
        let interval = yield_interval.max(1) as u64;
        let mut scratch = Vec::with_capacity(5);
        let mut marched = 0u64;
        for cz in lo[2]..hi[2] {
            for cy in lo[1]..hi[1] {
                let row_start = lattice.cube_id([lo[0], cy, cz]);
                let row_end = lattice.cube_id([hi[0], cy, cz]);
                let stale: Vec<u64> = self.cells.range(row_start..row_end).map(|(&k, _)| k).collect();
                for k in stale {
                    if let Some(old) = self.cells.remove(&k) {
                        self.triangle_count -= old.len();
                    }
                }
                for cx in lo[0]..hi[0] {
                    let c = [cx, cy, cz];
                    march_cell(grid, &lattice, self.iso, c, &mut scratch);
                    if !scratch.is_empty() {
                        self.triangle_count += scratch.len();
                        self.cells.insert(lattice.cube_id(c), std::mem::take(&mut scratch));
                    }
                }
                // rows are the unit of work so a row is never half cleared
                let before = marched;
                marched += (hi[0] - lo[0]) as u64;
                self.last_remarched = marched;
                if marched / interval != before / interval || marched == total {
                    let mut p = ExtractionProgress {
                        cubes_done: marched,
                        cubes_total: total,
                        partial_triangles: self.triangle_count as u64,
                        cancelled: false,
                    };
                    on_progress(p);
                    if marched < total && cancel.is_cancelled() {
                        p.cancelled = true;
                        on_progress(p);
                        return Ok(RegionUpdate::Cancelled(p));
                    }
                }
            }
        }
        Ok(RegionUpdate::Done(marched))
    }

    /// Indexed mesh of every stored triangle. Vertices are numbered in order
    /// of first use, triangles follow cube order.
    pub fn mesh(&self, grid: &DensityGrid) -> TriangleMesh {
        self.assemble(grid, self.cells.values())
    }

    /// Mesh made only of the cubes touching `region`.
    pub fn patch_mesh(&self, grid: &DensityGrid, region: VoxelBox) -> TriangleMesh {
        if region.is_empty() {
            return TriangleMesh::default();
        }
        let lattice = self.lattice;
        let region = region.clamp_to(lattice.dims);
        let (lo, hi) = lattice.cubes_touching(&region);
        let mut rows = Vec::new();
        for cz in lo[2]..hi[2] {
            for cy in lo[1]..hi[1] {
                let start = lattice.cube_id([lo[0], cy, cz]);
                let end = lattice.cube_id([hi[0], cy, cz]);
                rows.extend(self.cells.range(start..end).map(|(_, t)| t));
            }
        }
        self.assemble(grid, rows.into_iter())
    }

    fn assemble<'a>(&self, grid: &DensityGrid, cells: impl Iterator<Item = &'a Vec<[u64; 3]>>) -> TriangleMesh {
        let mut index: HashMap<u64, u32> = HashMap::with_capacity(self.triangle_count / 2 + 16);
        let mut vertices = Vec::with_capacity(self.triangle_count / 2 + 16);
        let mut triangles = Vec::with_capacity(self.triangle_count);
        for tris in cells {
            for tri in tris {
                let t = tri.map(|key| {
                    *index.entry(key).or_insert_with(|| {
                        vertices.push(self.edge_vertex(grid, key));
                        (vertices.len() - 1) as u32
                    })
                });
                triangles.push(t);
            }
        }
        TriangleMesh::new(vertices, triangles)
    }

    /// Position (mm) of the iso crossing on lattice edge `key`.
    fn edge_vertex(&self, grid: &DensityGrid, key: u64) -> [f64; 3] {
        let (p, axis) = self.lattice.decode_edge(key);
        let mut q = p;
        q[axis] += 1;
        let (da, db) = (f64::from(grid.padded(p)), f64::from(grid.padded(q)));
        let t = (self.iso - da) / (db - da);
        let mut pos = [0.0; 3];
        for i in 0..3 {
            let coord = p[i] as f64 - 1.0 + if i == axis { t } else { 0.0 };
            pos[i] = coord * self.spacing[i];
        }
        pos
    }
}

/// Full extraction. Progress is reported after every `yield_interval`
/// cubes and once at the end; cancellation is checked at each report.
pub fn extract_isosurface(
    grid: &DensityGrid,
    config: &McConfig,
    mut on_progress: impl FnMut(ExtractionProgress),
    cancel: &CancelToken,
) -> Result<TriangleMesh, ExtractError> {
    config.validate()?;
    match ExtractionState::build(grid, config, &mut on_progress, cancel) {
        Ok(state) => Ok(state.mesh(grid)),
        Err((state, progress)) => Err(ExtractError::Cancelled {
            progress,
            partial: Box::new(state.mesh(grid)),
        }),
    }
}

/// Applies a region edit to `state` and returns the updated full mesh.
pub fn update_region(
    grid: &DensityGrid,
    state: &mut ExtractionState,
    changed: VoxelBox,
) -> Result<TriangleMesh, ExtractError> {
    state.update(grid, changed)?;
    Ok(state.mesh(grid))
}
