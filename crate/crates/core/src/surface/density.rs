use serde::{Deserialize, Serialize};

use super::{McConfig, VoxelBox};
use crate::volume::{linear_index, voxel_count, Dims, MaskVolume, Spacing, VoxelVolume, FOREGROUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensitySource {
    Mask,
    Scan,
}

/// What a density grid is built from. Masks carry no spacing of their own,
/// so it travels alongside.
#[derive(Debug, Clone, Copy)]
pub enum GridSource<'a> {
    Mask { mask: &'a MaskVolume, spacing: Spacing },
    Scan(&'a VoxelVolume),
}

/// Scalar field in [0, 1] sampled at voxel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    dims: Dims,
    spacing: Spacing,
    values: Vec<f32>,
    source: DensitySource,
}

impl DensityGrid {
    /// Builds a grid from raw values, clamping each into [0, 1].
    pub fn from_values(dims: Dims, spacing: Spacing, values: Vec<f32>, source: DensitySource) -> Self {
        assert_eq!(values.len(), voxel_count(dims), "density values do not match dims");
        let values = values.into_iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect();
        Self {
            dims,
            spacing,
            values,
            source,
        }
    }

    pub fn from_mask(mask: &MaskVolume, spacing: Spacing) -> Self {
        Self {
            dims: mask.dims(),
            spacing,
            values: mask.labels().iter().map(|&l| mask_density(l)).collect(),
            source: DensitySource::Mask,
        }
    }

    pub fn from_scan(volume: &VoxelVolume, scan_threshold: u8) -> Self {
        Self {
            dims: volume.dims(),
            spacing: volume.spacing(),
            values: volume
                .intensities()
                .iter()
                .map(|&v| if v >= scan_threshold { 1.0 } else { 0.0 })
                .collect(),
            source: DensitySource::Scan,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn source(&self) -> DensitySource {
        self.source
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.values[linear_index(self.dims, x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: f32) {
        let i = linear_index(self.dims, x, y, z);
        self.values[i] = value.clamp(0.0, 1.0);
    }

    /// Density at padded lattice point `p`, where padded coordinate `c`
    /// is voxel `c - 1` and everything outside the volume is 0.
    #[inline]
    pub(crate) fn padded(&self, p: [usize; 3]) -> f32 {
        if p[0] == 0 || p[1] == 0 || p[2] == 0 || p[0] > self.dims[0] || p[1] > self.dims[1] || p[2] > self.dims[2] {
            0.0
        } else {
            self.values[linear_index(self.dims, p[0] - 1, p[1] - 1, p[2] - 1)]
        }
    }

    /// Copies the mask labels inside `region` into the grid.
    pub fn refresh_from_mask(&mut self, mask: &MaskVolume, region: VoxelBox) {
        assert_eq!(mask.dims(), self.dims, "mask does not match grid");
        let region = region.clamp_to(self.dims);
        if region.is_empty() {
            return;
        }
        for z in region.lo[2]..region.hi[2] {
            for y in region.lo[1]..region.hi[1] {
                let start = linear_index(self.dims, region.lo[0], y, z);
                let end = start + (region.hi[0] - region.lo[0]);
                for (dst, &l) in self.values[start..end].iter_mut().zip(&mask.labels()[start..end]) {
                    *dst = mask_density(l);
                }
            }
        }
    }

    /// Trilinear interpolation of the zero-padded field at world point `p`
    /// (mm). Voxel `i` sits at `i * spacing`.
    pub fn trilinear(&self, p: [f64; 3]) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            // padded coordinate
            let c = p[a] / self.spacing[a] + 1.0;
            if c < 0.0 || c > self.dims[a] as f64 + 1.0 {
                return 0.0;
            }
            let f = c.floor().min(self.dims[a] as f64);
            base[a] = f as usize;
            frac[a] = c - f;
        }
        let mut acc = 0.0;
        for k in 0..8 {
            let o = [k & 1, (k >> 1) & 1, (k >> 2) & 1];
            let mut w = 1.0;
            for a in 0..3 {
                w *= if o[a] == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w != 0.0 {
                acc += w * f64::from(self.padded([base[0] + o[0], base[1] + o[1], base[2] + o[2]]));
            }
        }
        acc
    }
}

#[inline]
fn mask_density(label: u8) -> f32 {
    if label == FOREGROUND {
        1.0
    } else {
        0.0
    }
}

/// Thresholds a mask or scan into a binary density grid.
pub fn build_density_grid(source: GridSource<'_>, config: &McConfig) -> DensityGrid {
    match source {
        GridSource::Mask { mask, spacing } => DensityGrid::from_mask(mask, spacing),
        GridSource::Scan(volume) => DensityGrid::from_scan(volume, config.scan_threshold),
    }
}
