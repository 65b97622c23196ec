use rayon::prelude::*;
use serde::Serialize;

use super::{decimate, DecimationConfig, TriangleMesh};
use crate::error::MeshError;

#[derive(Debug, Clone, PartialEq)]
pub struct LodLevel {
    pub mesh: TriangleMesh,
    pub ratio: f64,
    /// Viewing distance (mm) from which this level is used.
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LodLadder {
    pub levels: Vec<LodLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LodSummary {
    pub ratio: f64,
    pub min_distance: f64,
    pub triangles: usize,
}

impl LodLadder {
    pub fn summary(&self) -> Vec<LodSummary> {
        self.levels
            .iter()
            .map(|l| LodSummary {
                ratio: l.ratio,
                min_distance: l.min_distance,
                triangles: l.mesh.triangle_count(),
            })
            .collect()
    }
}

/// One decimated copy of `mesh` per ratio, each built from the original.
///
/// `ratios` must start at 1 and strictly decrease; `distances` must start at
/// 0 and strictly increase. A level whose target is unreachable keeps the
/// best mesh found, as long as triangle counts still strictly decrease.
pub fn build_lod_ladder(
    mesh: &TriangleMesh,
    ratios: &[f64],
    distances: &[f64],
    base: &DecimationConfig,
) -> Result<LodLadder, MeshError> {
    if ratios.is_empty() || ratios.len() != distances.len() {
        return Err(MeshError::InvalidLadder(format!(
            "{} ratios for {} distances",
            ratios.len(),
            distances.len()
        )));
    }
    if ratios[0] != 1.0 || ratios.windows(2).any(|w| !(w[1] < w[0])) || ratios.iter().any(|&r| r <= 0.0) {
        return Err(MeshError::InvalidLadder("ratios must start at 1 and strictly decrease".into()));
    }
    if distances[0] != 0.0 || distances.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MeshError::InvalidLadder("distances must start at 0 and strictly increase".into()));
    }
    let meshes: Vec<TriangleMesh> = ratios
        .par_iter()
        .map(|&ratio| {
            if ratio == 1.0 {
                return Ok(mesh.clone());
            }
            let cfg = DecimationConfig {
                target_ratio: ratio,
                ..*base
            };
            decimate(mesh, &cfg).or_else(MeshError::into_best)
        })
        .collect::<Result<_, _>>()?;
    if meshes.windows(2).any(|w| w[1].triangle_count() >= w[0].triangle_count()) {
        let counts: Vec<usize> = meshes.iter().map(TriangleMesh::triangle_count).collect();
        return Err(MeshError::InvalidLadder(format!(
            "triangle counts {counts:?} do not strictly decrease"
        )));
    }
    Ok(LodLadder {
        levels: meshes
            .into_iter()
            .zip(ratios.iter().zip(distances))
            .map(|(mesh, (&ratio, &min_distance))| LodLevel {
                mesh,
                ratio,
                min_distance,
            })
            .collect(),
    })
}

/// Index of the coarsest level whose `min_distance` does not exceed `distance`.
pub fn select_lod(ladder: &LodLadder, distance: f64) -> usize {
    ladder
        .levels
        .iter()
        .rposition(|l| l.min_distance <= distance)
        .unwrap_or(0)
}
