//! TIFF slice stacks: scan ingestion, mask import/export and the
//! `volume.meta` sidecar.
//!
//! Decoding goes through the `tiff` crate and accepts baseline grayscale
//! images (8 or 16 bit, strips, uncompressed or LZW). Masks are written by a
//! small local encoder so every export is a single uncompressed strip with a
//! fixed byte layout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tiff::decoder::{Decoder, DecodingResult};
use tiff::tags::Tag;
use tiff::ColorType;

use crate::error::VolumeError;
use crate::volume::{
    normalize_unchecked, validate_spacing, Dims, MaskVolume, Spacing, VoxelVolume, Window,
    FOREGROUND,
};

const COMPRESSION_NONE: u16 = 1;
const COMPRESSION_LZW: u16 = 5;
const PHOTOMETRIC_WHITE_IS_ZERO: u16 = 0;
const PHOTOMETRIC_BLACK_IS_ZERO: u16 = 1;

/// Raw samples of one decoded slice.
#[derive(Debug)]
enum RawSlice {
    Gray8(Vec<u8>),
    Gray16(Vec<i32>),
}

struct Decoded {
    width: usize,
    height: usize,
    data: RawSlice,
}

impl Decoded {
    fn bit_depth(&self) -> u8 {
        match self.data {
            RawSlice::Gray8(_) => 8,
            RawSlice::Gray16(_) => 16,
        }
    }
}

fn decode_err(path: &Path, err: impl std::fmt::Display) -> VolumeError {
    VolumeError::DecodeError {
        path: path.to_path_buf(),
        reason: err.to_string(),
    }
}

fn decode_slice(path: &Path) -> Result<Decoded, VolumeError> {
    let file = File::open(path).map_err(|e| VolumeError::io(path, e))?;
    let mut decoder = Decoder::new(BufReader::new(file)).map_err(|e| decode_err(path, e))?;

    let colortype = decoder.colortype().map_err(|e| decode_err(path, e))?;
    let depth = match colortype {
        ColorType::Gray(d @ (8 | 16)) => d,
        other => {
            return Err(VolumeError::UnsupportedPixelFormat(format!(
                "{}: {other:?}",
                path.display()
            )))
        }
    };
    let compression = decoder
        .find_tag_unsigned::<u16>(Tag::Compression)
        .map_err(|e| decode_err(path, e))?
        .unwrap_or(COMPRESSION_NONE);
    if compression != COMPRESSION_NONE && compression != COMPRESSION_LZW {
        return Err(VolumeError::UnsupportedPixelFormat(format!(
            "{}: compression {compression}",
            path.display()
        )));
    }
    if decoder.get_chunk_type() != tiff::decoder::ChunkType::Strip {
        return Err(VolumeError::UnsupportedPixelFormat(format!(
            "{}: tiled layout",
            path.display()
        )));
    }
    let photometric = decoder
        .find_tag_unsigned::<u16>(Tag::PhotometricInterpretation)
        .map_err(|e| decode_err(path, e))?
        .unwrap_or(PHOTOMETRIC_BLACK_IS_ZERO);
    let invert = photometric == PHOTOMETRIC_WHITE_IS_ZERO;

    let (w, h) = decoder.dimensions().map_err(|e| decode_err(path, e))?;
    let image = decoder.read_image().map_err(|e| decode_err(path, e))?;
    let data = match (depth, image) {
        (8, DecodingResult::U8(mut v)) => {
            if invert {
                v.iter_mut().for_each(|p| *p = 255 - *p);
            }
            RawSlice::Gray8(v)
        }
        (16, DecodingResult::U16(v)) => RawSlice::Gray16(
            v.into_iter()
                .map(|p| i32::from(if invert { u16::MAX - p } else { p }))
                .collect(),
        ),
        (16, DecodingResult::I16(v)) => RawSlice::Gray16(
            v.into_iter()
                .map(|p| if invert { -1 - i32::from(p) } else { i32::from(p) })
                .collect(),
        ),
        (_, other) => {
            return Err(VolumeError::UnsupportedPixelFormat(format!(
                "{}: sample type {}",
                path.display(),
                decoding_result_name(&other)
            )))
        }
    };
    let (width, height) = (w as usize, h as usize);
    let len = match &data {
        RawSlice::Gray8(v) => v.len(),
        RawSlice::Gray16(v) => v.len(),
    };
    if len != width * height {
        return Err(decode_err(path, format!("expected {} samples, got {len}", width * height)));
    }
    Ok(Decoded {
        width,
        height,
        data,
    })
}

fn decoding_result_name(r: &DecodingResult) -> &'static str {
    match r {
        DecodingResult::U8(_) => "u8",
        DecodingResult::U16(_) => "u16",
        DecodingResult::U32(_) => "u32",
        DecodingResult::U64(_) => "u64",
        DecodingResult::F16(_) => "f16",
        DecodingResult::F32(_) => "f32",
        DecodingResult::F64(_) => "f64",
        DecodingResult::I8(_) => "i8",
        DecodingResult::I16(_) => "i16",
        DecodingResult::I32(_) => "i32",
        DecodingResult::I64(_) => "i64",
    }
}

/// Decodes all slices (in parallel) and checks they share one size.
fn decode_stack<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<(usize, usize, Vec<Decoded>), VolumeError> {
    if paths.is_empty() {
        return Err(VolumeError::EmptyStack);
    }
    let slices = paths
        .par_iter()
        .map(|p| decode_slice(p.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let (width, height) = (slices[0].width, slices[0].height);
    for (i, s) in slices.iter().enumerate() {
        if (s.width, s.height) != (width, height) {
            return Err(VolumeError::DimensionMismatch {
                slice: Some(i),
                expected: [width, height, paths.len()],
                actual: [s.width, s.height, paths.len()],
            });
        }
    }
    Ok((width, height, slices))
}

/// Loads an ordered TIFF stack as a scan volume.
///
/// Slice `k` of the result is `paths[k]`. 16-bit slices are windowed with
/// `window` (or [`Window::DEFAULT`]); 8-bit slices are copied unchanged.
pub fn load_tiff_stack<P: AsRef<Path> + Sync>(
    paths: &[P],
    spacing: Spacing,
    window: Option<Window>,
) -> Result<VoxelVolume, VolumeError> {
    validate_spacing(spacing)?;
    let window = match window {
        Some(w) => Some(Window::new(w.center, w.width)?),
        None => None,
    };
    let (width, height, slices) = decode_stack(paths)?;
    let depth = slices[0].bit_depth();
    if let Some(i) = slices.iter().position(|s| s.bit_depth() != depth) {
        return Err(VolumeError::UnsupportedPixelFormat(format!(
            "slice {i} is {}-bit, stack is {depth}-bit",
            slices[i].bit_depth()
        )));
    }

    let dims = [width, height, slices.len()];
    let plane = width * height;
    let mut intensities = Vec::with_capacity(plane * slices.len());
    let applied = if depth == 16 {
        Some(window.unwrap_or_default())
    } else {
        None
    };
    for s in slices {
        match s.data {
            RawSlice::Gray8(v) => intensities.extend_from_slice(&v),
            RawSlice::Gray16(v) => {
                let w = applied.expect("16-bit stacks always carry a window");
                intensities.extend(v.into_iter().map(|p| normalize_unchecked(p, w)));
            }
        }
    }
    VoxelVolume::new(dims, spacing, intensities, depth, applied)
}

/// Loads a mask stack: any nonzero source pixel becomes foreground.
pub fn load_mask_stack<P: AsRef<Path> + Sync>(
    paths: &[P],
    parent_dims: Dims,
) -> Result<MaskVolume, VolumeError> {
    let (width, height, slices) = decode_stack(paths)?;
    let dims = [width, height, slices.len()];
    if dims != parent_dims {
        return Err(VolumeError::DimensionMismatch {
            slice: None,
            expected: parent_dims,
            actual: dims,
        });
    }
    let mut labels = Vec::with_capacity(width * height * slices.len());
    for s in slices {
        match s.data {
            RawSlice::Gray8(v) => labels.extend(v.into_iter().map(|p| if p != 0 { FOREGROUND } else { 0 })),
            RawSlice::Gray16(v) => labels.extend(v.into_iter().map(|p| if p != 0 { FOREGROUND } else { 0 })),
        }
    }
    MaskVolume::from_labels(dims, labels)
}

/// File name of mask slice `index`.
pub fn mask_file_name(basename: &str, index: usize) -> String {
    format!("{basename}_{index:04}.tif")
}

/// Writes one 8-bit TIFF per axial mask slice, returning paths in slice order.
pub fn export_mask_stack(
    mask: &MaskVolume,
    directory: &Path,
    basename: &str,
) -> Result<Vec<PathBuf>, VolumeError> {
    std::fs::create_dir_all(directory).map_err(|e| VolumeError::io(directory, e))?;
    let [nx, ny, nz] = mask.dims();
    let plane = nx * ny;
    let mut written = Vec::with_capacity(nz);
    for z in 0..nz {
        let path = directory.join(mask_file_name(basename, z));
        let pixels = &mask.labels()[z * plane..(z + 1) * plane];
        let bytes = encode_gray8_tiff(nx as u32, ny as u32, pixels);
        std::fs::write(&path, bytes).map_err(|e| VolumeError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Encodes a baseline little-endian 8-bit grayscale TIFF with one
/// uncompressed strip. Layout: header, pixel data, then the IFD.
pub fn encode_gray8_tiff(width: u32, height: u32, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width as usize * height as usize);
    const SHORT: u16 = 3;
    const LONG: u16 = 4;
    const RATIONAL: u16 = 5;

    let data_offset = 8u32;
    let data_len = pixels.len() as u32;
    let mut ifd_offset = data_offset + data_len;
    ifd_offset += ifd_offset & 1;

    // (tag, type, value); rationals point into the trailing area.
    let entries: [(u16, u16, u32); 12] = [
        (256, LONG, width),
        (257, LONG, height),
        (258, SHORT, 8),
        (259, SHORT, COMPRESSION_NONE as u32),
        (262, SHORT, PHOTOMETRIC_BLACK_IS_ZERO as u32),
        (273, LONG, data_offset),
        (277, SHORT, 1),
        (278, LONG, height),
        (279, LONG, data_len),
        (282, RATIONAL, 0),
        (283, RATIONAL, 0),
        (296, SHORT, 2),
    ];
    let ifd_len = 2 + entries.len() as u32 * 12 + 4;
    let rational_offset = ifd_offset + ifd_len;

    let mut out = Vec::with_capacity((rational_offset + 16) as usize);
    out.extend_from_slice(b"II");
    out.extend_from_slice(&42u16.to_le_bytes());
    out.extend_from_slice(&ifd_offset.to_le_bytes());
    out.extend_from_slice(pixels);
    out.resize(ifd_offset as usize, 0);

    out.extend_from_slice(&(entries.len() as u16).to_le_bytes());
    let mut next_rational = rational_offset;
    for (tag, ty, value) in entries {
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&ty.to_le_bytes());
        out.extend_from_slice(&1u32.to_le_bytes());
        match ty {
            SHORT => {
                out.extend_from_slice(&(value as u16).to_le_bytes());
                out.extend_from_slice(&[0, 0]);
            }
            RATIONAL => {
                out.extend_from_slice(&next_rational.to_le_bytes());
                next_rational += 8;
            }
            _ => out.extend_from_slice(&value.to_le_bytes()),
        }
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    for _ in 0..2 {
        // 72 dpi
        out.extend_from_slice(&72u32.to_le_bytes());
        out.extend_from_slice(&1u32.to_le_bytes());
    }
    out
}

/// Lists `.tif`/`.tiff` files in `dir`, sorted lexicographically by name.
pub fn list_stack_dir(dir: &Path) -> Result<Vec<PathBuf>, VolumeError> {
    let entries = std::fs::read_dir(dir).map_err(|e| VolumeError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| VolumeError::io(dir, e))?.path();
        let is_tiff = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.eq_ignore_ascii_case("tif") || e.eq_ignore_ascii_case("tiff"))
            .unwrap_or(false);
        if is_tiff && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Parsed `volume.meta` sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMeta {
    pub dims: Dims,
    pub spacing_mm: Spacing,
    pub window: Option<Window>,
    pub source_bit_depth: u8,
}

impl VolumeMeta {
    pub fn of(volume: &VoxelVolume) -> Self {
        Self {
            dims: volume.dims(),
            spacing_mm: volume.spacing(),
            window: volume.window(),
            source_bit_depth: volume.source_bit_depth(),
        }
    }

    pub fn to_text(&self) -> String {
        let [nx, ny, nz] = self.dims;
        let [sx, sy, sz] = self.spacing_mm;
        let window = match self.window {
            Some(w) => format!("{},{}", w.center, w.width),
            None => "none".to_string(),
        };
        format!(
            "dims={nx},{ny},{nz}\nspacing_mm={sx},{sy},{sz}\nwindow={window}\nsource_bit_depth={}\n",
            self.source_bit_depth
        )
    }

    pub fn parse(text: &str) -> Result<Self, VolumeError> {
        let bad = |m: String| VolumeError::BadMetadata(m);
        let mut dims = None;
        let mut spacing = None;
        let mut window = None;
        let mut depth = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line without '=': {line}")))?;
            match key.trim() {
                "dims" => {
                    let v = parse_list::<usize>(value).ok_or_else(|| bad(format!("dims: {value}")))?;
                    dims = Some(<[usize; 3]>::try_from(v).map_err(|_| bad(format!("dims: {value}")))?);
                }
                "spacing_mm" => {
                    let v = parse_list::<f64>(value).ok_or_else(|| bad(format!("spacing_mm: {value}")))?;
                    spacing = Some(<[f64; 3]>::try_from(v).map_err(|_| bad(format!("spacing_mm: {value}")))?);
                }
                "window" => {
                    window = Some(if value.trim() == "none" {
                        None
                    } else {
                        let v = parse_list::<f64>(value).ok_or_else(|| bad(format!("window: {value}")))?;
                        let [c, w] = <[f64; 2]>::try_from(v).map_err(|_| bad(format!("window: {value}")))?;
                        Some(Window::new(c, w)?)
                    });
                }
                "source_bit_depth" => {
                    depth = Some(value.trim().parse::<u8>().map_err(|_| bad(format!("source_bit_depth: {value}")))?);
                }
                _ => {}
            }
        }
        Ok(Self {
            dims: dims.ok_or_else(|| bad("missing dims".into()))?,
            spacing_mm: spacing.ok_or_else(|| bad("missing spacing_mm".into()))?,
            window: window.ok_or_else(|| bad("missing window".into()))?,
            source_bit_depth: depth.ok_or_else(|| bad("missing source_bit_depth".into()))?,
        })
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    s.split(',').map(|p| p.trim().parse().ok()).collect()
}

/// Writes `volume.meta` into `directory` and returns its path.
pub fn write_volume_meta(volume: &VoxelVolume, directory: &Path) -> Result<PathBuf, VolumeError> {
    std::fs::create_dir_all(directory).map_err(|e| VolumeError::io(directory, e))?;
    let path = directory.join("volume.meta");
    let file = File::create(&path).map_err(|e| VolumeError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(VolumeMeta::of(volume).to_text().as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| VolumeError::io(&path, e))?;
    Ok(path)
}
