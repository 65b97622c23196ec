//! In-memory scan and mask volumes plus slice extraction.
//!
//! Voxels are stored x-fastest, then y, then z. An axial slice is one stored
//! plane; coronal and sagittal slices are gathered from the planes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::VolumeError;

/// Voxel counts along x, y and z.
pub type Dims = [usize; 3];

/// Millimetres per voxel along x, y and z.
pub type Spacing = [f64; 3];

/// Voxel spacing of the Open-Full-Jaw scans, used when the caller gives none.
pub const DEFAULT_SPACING: Spacing = [0.3, 0.3, 0.5];

/// Viewing plane of a 2D slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Constant z; pixel (px, py) is voxel (px, py, index).
    Axial,
    /// Constant y; pixel (px, py) is voxel (px, index, py).
    Coronal,
    /// Constant x; pixel (px, py) is voxel (index, px, py).
    Sagittal,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Axial, Axis::Coronal, Axis::Sagittal];

    /// Number of slices along this axis.
    pub fn extent(self, dims: Dims) -> usize {
        match self {
            Axis::Axial => dims[2],
            Axis::Coronal => dims[1],
            Axis::Sagittal => dims[0],
        }
    }

    /// (width, height) of a slice along this axis.
    pub fn slice_dims(self, dims: Dims) -> (usize, usize) {
        match self {
            Axis::Axial => (dims[0], dims[1]),
            Axis::Coronal => (dims[0], dims[2]),
            Axis::Sagittal => (dims[1], dims[2]),
        }
    }

    /// Voxel coordinate of pixel (px, py) on slice `index`.
    #[inline]
    pub fn voxel(self, index: usize, px: usize, py: usize) -> [usize; 3] {
        match self {
            Axis::Axial => [px, py, index],
            Axis::Coronal => [px, index, py],
            Axis::Sagittal => [index, px, py],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Axial => "axial",
            Axis::Coronal => "coronal",
            Axis::Sagittal => "sagittal",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Axis {
    type Err = VolumeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "axial" => Ok(Axis::Axial),
            "coronal" => Ok(Axis::Coronal),
            "sagittal" => Ok(Axis::Sagittal),
            other => Err(VolumeError::UnknownAxis(other.to_string())),
        }
    }
}

/// A slice position: which plane and which index along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SliceRef {
    pub axis: Axis,
    pub index: usize,
}

impl SliceRef {
    pub fn new(axis: Axis, index: usize) -> Self {
        Self { axis, index }
    }

    pub fn validate(&self, dims: Dims) -> Result<(), VolumeError> {
        let extent = self.axis.extent(dims);
        if self.index >= extent {
            return Err(VolumeError::IndexOutOfRange {
                axis: self.axis,
                index: self.index,
                extent,
            });
        }
        Ok(())
    }
}

/// Linear window/level used to map 16-bit samples onto 8 bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: f64,
    pub width: f64,
}

impl Window {
    /// Soft tissue through bone.
    pub const DEFAULT: Window = Window {
        center: 400.0,
        width: 1800.0,
    };

    pub fn new(center: f64, width: f64) -> Result<Self, VolumeError> {
        if !(width > 0.0) || !center.is_finite() || !width.is_finite() {
            return Err(VolumeError::InvalidWindow { center, width });
        }
        Ok(Self { center, width })
    }
}

impl Default for Window {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Maps a source sample onto [0, 255] through `window`.
///
/// `[center - width/2, center + width/2]` is mapped affinely onto `[0, 255]`
/// with round-half-up; samples outside the window clamp.
pub fn normalize_to_8bit(sample: i32, window: Window) -> Result<u8, VolumeError> {
    if !(window.width > 0.0) {
        return Err(VolumeError::InvalidWindow {
            center: window.center,
            width: window.width,
        });
    }
    Ok(normalize_unchecked(sample, window))
}

#[inline]
pub(crate) fn normalize_unchecked(sample: i32, window: Window) -> u8 {
    let low = window.center - window.width / 2.0;
    let scaled = (f64::from(sample) - low) * 255.0 / window.width;
    (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// A loaded CT scan as 8-bit intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    dims: Dims,
    spacing: Spacing,
    intensities: Vec<u8>,
    source_bit_depth: u8,
    /// `None` when 8-bit sources were passed through unchanged.
    window: Option<Window>,
}

impl VoxelVolume {
    pub fn new(
        dims: Dims,
        spacing: Spacing,
        intensities: Vec<u8>,
        source_bit_depth: u8,
        window: Option<Window>,
    ) -> Result<Self, VolumeError> {
        validate_dims(dims)?;
        validate_spacing(spacing)?;
        let expected = voxel_count(dims);
        if intensities.len() != expected {
            return Err(VolumeError::LengthMismatch {
                expected,
                actual: intensities.len(),
            });
        }
        if source_bit_depth != 8 && source_bit_depth != 16 {
            return Err(VolumeError::UnsupportedPixelFormat(format!(
                "{source_bit_depth}-bit source"
            )));
        }
        Ok(Self {
            dims,
            spacing,
            intensities,
            source_bit_depth,
            window,
        })
    }

    /// Builds an 8-bit volume from a per-voxel function, mostly for synthetic data.
    pub fn from_fn(
        dims: Dims,
        spacing: Spacing,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self, VolumeError> {
        validate_dims(dims)?;
        let mut intensities = Vec::with_capacity(voxel_count(dims));
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    intensities.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, spacing, intensities, 8, None)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn intensities(&self) -> &[u8] {
        &self.intensities
    }

    pub fn source_bit_depth(&self) -> u8 {
        self.source_bit_depth
    }

    pub fn window(&self) -> Option<Window> {
        self.window
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.intensities[linear_index(self.dims, x, y, z)]
    }

    /// Extracts one slice. Axial slices copy a stored plane; the other two
    /// axes gather the nearest voxel for every pixel.
    pub fn slice(&self, axis: Axis, index: usize) -> Result<SliceImage, VolumeError> {
        SliceRef::new(axis, index).validate(self.dims)?;
        let pixels = gather_slice(&self.intensities, self.dims, axis, index);
        let (width, height) = axis.slice_dims(self.dims);
        Ok(SliceImage {
            axis,
            index,
            width,
            height,
            pixels,
        })
    }
}

/// Free-function form of [`VoxelVolume::slice`].
pub fn get_slice(volume: &VoxelVolume, axis: Axis, index: usize) -> Result<SliceImage, VolumeError> {
    volume.slice(axis, index)
}

/// Foreground label value.
pub const FOREGROUND: u8 = 255;
/// Background label value.
pub const BACKGROUND: u8 = 0;

/// Binary segmentation congruent with a [`VoxelVolume`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskVolume {
    dims: Dims,
    labels: Vec<u8>,
}

impl MaskVolume {
    /// All-background mask.
    pub fn empty(dims: Dims) -> Result<Self, VolumeError> {
        validate_dims(dims)?;
        Ok(Self {
            dims,
            labels: vec![BACKGROUND; voxel_count(dims)],
        })
    }

    /// Wraps existing labels; every value must be 0 or 255.
    pub fn from_labels(dims: Dims, labels: Vec<u8>) -> Result<Self, VolumeError> {
        validate_dims(dims)?;
        let expected = voxel_count(dims);
        if labels.len() != expected {
            return Err(VolumeError::LengthMismatch {
                expected,
                actual: labels.len(),
            });
        }
        if let Some(bad) = labels
            .iter()
            .position(|&v| v != BACKGROUND && v != FOREGROUND)
        {
            return Err(VolumeError::InvalidLabel {
                index: bad,
                value: labels[bad],
            });
        }
        Ok(Self { dims, labels })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Result<Self, VolumeError> {
        let mut mask = Self::empty(dims)?;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    if f(x, y, z) {
                        mask.set(x, y, z, FOREGROUND);
                    }
                }
            }
        }
        Ok(mask)
    }

    /// Empty mask bound to `volume`.
    pub fn for_volume(volume: &VoxelVolume) -> Self {
        Self {
            dims: volume.dims(),
            labels: vec![BACKGROUND; voxel_count(volume.dims())],
        }
    }

    /// Checks the mask can be bound to `volume`.
    pub fn check_bound_to(&self, volume: &VoxelVolume) -> Result<(), VolumeError> {
        if self.dims != volume.dims() {
            return Err(VolumeError::DimensionMismatch {
                slice: None,
                expected: volume.dims(),
                actual: self.dims,
            });
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.labels[linear_index(self.dims, x, y, z)]
    }

    /// Sets one voxel. Values other than 0/255 are a caller bug.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, label: u8) {
        debug_assert!(label == BACKGROUND || label == FOREGROUND);
        let i = linear_index(self.dims, x, y, z);
        self.labels[i] = label;
    }

    #[inline]
    pub fn get_pixel(&self, slice: SliceRef, px: usize, py: usize) -> u8 {
        let [x, y, z] = slice.axis.voxel(slice.index, px, py);
        self.get(x, y, z)
    }

    #[inline]
    pub fn set_pixel(&mut self, slice: SliceRef, px: usize, py: usize, label: u8) {
        let [x, y, z] = slice.axis.voxel(slice.index, px, py);
        self.set(x, y, z, label);
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&v| v == FOREGROUND).count()
    }

    /// Labels of one slice, laid out like a [`SliceImage`].
    pub fn slice_labels(&self, axis: Axis, index: usize) -> Result<Vec<u8>, VolumeError> {
        SliceRef::new(axis, index).validate(self.dims)?;
        Ok(gather_slice(&self.labels, self.dims, axis, index))
    }
}

/// One 8-bit grayscale slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceImage {
    pub axis: Axis,
    pub index: usize,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl SliceImage {
    #[inline]
    pub fn pixel(&self, px: usize, py: usize) -> u8 {
        self.pixels[py * self.width + px]
    }
}

pub(crate) fn validate_dims(dims: Dims) -> Result<(), VolumeError> {
    if dims.iter().any(|&d| d == 0) {
        return Err(VolumeError::InvalidDims(dims));
    }
    Ok(())
}

pub(crate) fn validate_spacing(spacing: Spacing) -> Result<(), VolumeError> {
    if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(VolumeError::InvalidSpacing(spacing));
    }
    Ok(())
}

#[inline]
pub fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[inline]
pub fn linear_index(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

fn gather_slice(data: &[u8], dims: Dims, axis: Axis, index: usize) -> Vec<u8> {
    let (w, h) = axis.slice_dims(dims);
    match axis {
        Axis::Axial => {
            let plane = dims[0] * dims[1];
            data[index * plane..(index + 1) * plane].to_vec()
        }
        Axis::Coronal => {
            let mut out = Vec::with_capacity(w * h);
            for z in 0..dims[2] {
                let start = linear_index(dims, 0, index, z);
                out.extend_from_slice(&data[start..start + dims[0]]);
            }
            out
        }
        Axis::Sagittal => {
            let mut out = Vec::with_capacity(w * h);
            for z in 0..dims[2] {
                for y in 0..dims[1] {
                    out.push(data[linear_index(dims, index, y, z)]);
                }
            }
            out
        }
    }
}
