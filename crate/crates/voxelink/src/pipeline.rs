//! Mask to mesh, shared by the batch CLI and the service export.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use voxelink_core::mesh::io::write_stl_file;
use voxelink_core::mesh::{build_lod_ladder, decimate, DecimationConfig, LodLadder, LodLevel};
use voxelink_core::stack::{export_mask_stack, write_volume_meta};
use voxelink_core::surface::{extract_isosurface, CancelToken, DensityGrid, McConfig};
use voxelink_core::{MaskVolume, MeshError, Spacing, TriangleMesh, VoxelVolume};

use crate::error::ServiceError;

/// Distance (mm) from which the decimated level is shown.
pub const FAR_LOD_DISTANCE: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mc: McConfig,
    pub decimation: DecimationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mc: McConfig::default(),
            decimation: DecimationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        self.mc.validate()?;
        self.decimation.validate()?;
        Ok(())
    }
}

/// Two levels, full and decimated. Collapses to a single full level when the
/// decimated one would not be strictly coarser.
pub fn build_ladder(mesh: &TriangleMesh, cfg: &DecimationConfig) -> Result<LodLadder, MeshError> {
    let single = || LodLadder {
        levels: vec![LodLevel {
            mesh: mesh.clone(),
            ratio: 1.0,
            min_distance: 0.0,
        }],
    };
    if mesh.is_empty() || cfg.target_ratio >= 1.0 {
        return Ok(single());
    }
    match build_lod_ladder(mesh, &[1.0, cfg.target_ratio], &[0.0, FAR_LOD_DISTANCE], cfg) {
        Ok(ladder) => Ok(ladder),
        Err(MeshError::InvalidLadder(_)) => Ok(single()),
        Err(e) => Err(e),
    }
}

/// Decimates to the configured ratio, settling for the best mesh reached
/// when the target cannot be met without breaking the validity checks.
pub fn decimate_best(mesh: &TriangleMesh, cfg: &DecimationConfig) -> Result<TriangleMesh, MeshError> {
    decimate(mesh, cfg).or_else(MeshError::into_best)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub extract_ms: f64,
    pub decimate_ms: f64,
    pub export_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportManifest {
    pub mask_files: Vec<PathBuf>,
    pub mesh_file: PathBuf,
    pub meta_file: PathBuf,
    pub triangles_before: usize,
    pub triangles_after: usize,
}

pub fn extract_mask(mask: &MaskVolume, spacing: Spacing, mc: &McConfig) -> Result<TriangleMesh, ServiceError> {
    let grid = DensityGrid::from_mask(mask, spacing);
    Ok(extract_isosurface(&grid, mc, |_| {}, &CancelToken::new())?)
}

/// Writes `mask_NNNN.tif`, `mesh.stl` and `volume.meta` into `directory`.
pub fn export_all(
    volume: &VoxelVolume,
    mask: &MaskVolume,
    cfg: &PipelineConfig,
    directory: &Path,
) -> Result<(ExportManifest, StageTimes), ServiceError> {
    cfg.validate()?;
    mask.check_bound_to(volume)?;
    let mut times = StageTimes::default();

    let t = Instant::now();
    let full = extract_mask(mask, volume.spacing(), &cfg.mc)?;
    times.extract_ms = ms(t);

    let t = Instant::now();
    let reduced = decimate_best(&full, &cfg.decimation)?;
    times.decimate_ms = ms(t);

    let t = Instant::now();
    let mask_files = export_mask_stack(mask, directory, "mask")?;
    let mesh_file = directory.join("mesh.stl");
    write_stl_file(&reduced, &mesh_file).map_err(MeshError::Io)?;
    let meta_file = write_volume_meta(volume, directory)?;
    times.export_ms = ms(t);

    Ok((
        ExportManifest {
            mask_files,
            mesh_file,
            meta_file,
            triangles_before: full.triangle_count(),
            triangles_after: reduced.triangle_count(),
        },
        times,
    ))
}

pub(crate) fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}
