#![allow(dead_code)]

use std::path::Path;

use voxelink_core::annotation::{CanvasPlane, StrokeLogEntry, StylusSample};
use voxelink_core::annotation::{BrushMode, Stroke};
use voxelink_core::stack::encode_gray8_tiff;
use voxelink_core::{Dims, SliceRef, Spacing};

/// Writes an 8-bit axial stack `slice_NNNN.tif` with intensities from `f`.
pub fn write_stack(dir: &Path, dims: Dims, f: impl Fn(usize, usize, usize) -> u8) {
    std::fs::create_dir_all(dir).unwrap();
    for z in 0..dims[2] {
        let mut px = Vec::with_capacity(dims[0] * dims[1]);
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                px.push(f(x, y, z));
            }
        }
        let bytes = encode_gray8_tiff(dims[0] as u32, dims[1] as u32, &px);
        std::fs::write(dir.join(format!("slice_{z:04}.tif")), bytes).unwrap();
    }
}

pub fn ramp(x: usize, y: usize, z: usize) -> u8 {
    ((x * 7 + y * 3 + z * 11) % 256) as u8
}

/// A pressed stylus held 10 mm above the canvas, pointing straight down
/// onto each pixel position in turn.
pub fn stroke_on(
    dims: Dims,
    spacing: Spacing,
    slice: SliceRef,
    id: u64,
    mode: BrushMode,
    radius_px: f64,
    points: &[[f64; 2]],
) -> StrokeLogEntry {
    let canvas = CanvasPlane::for_slice(dims, spacing, slice);
    let n = canvas.normal();
    let samples = points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let w = canvas.world_point(p);
            let tip = [w[0] + 10.0 * n[0], w[1] + 10.0 * n[1], w[2] + 10.0 * n[2]];
            StylusSample::new(tip, [-n[0], -n[1], -n[2]], i as f64 * 8.0, true).unwrap()
        })
        .collect();
    let stroke = Stroke::new(id, mode, radius_px, samples).unwrap();
    StrokeLogEntry::new(&canvas, &stroke)
}
