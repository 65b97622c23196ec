use std::fs::File;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use tiff::encoder::{colortype, Compression, TiffEncoder};
use voxelink_core::cache::SliceCache;
use voxelink_core::stack::{
    export_mask_stack, list_stack_dir, load_mask_stack, load_tiff_stack, write_volume_meta, VolumeMeta,
};
use voxelink_core::volume::DEFAULT_SPACING;
use voxelink_core::{Axis, MaskVolume, VolumeError, Window};

fn write_u16(path: &Path, w: u32, h: u32, data: &[u16]) {
    let mut enc = TiffEncoder::new(File::create(path).unwrap()).unwrap();
    enc.write_image::<colortype::Gray16>(w, h, data).unwrap();
}

fn write_u8(path: &Path, w: u32, h: u32, data: &[u8]) {
    let mut enc = TiffEncoder::new(File::create(path).unwrap()).unwrap();
    enc.write_image::<colortype::Gray8>(w, h, data).unwrap();
}

fn write_u8_lzw(path: &Path, w: u32, h: u32, data: &[u8]) {
    let mut enc = TiffEncoder::new(File::create(path).unwrap())
        .unwrap()
        .with_compression(Compression::Lzw);
    enc.write_image::<colortype::Gray8>(w, h, data).unwrap();
}

/// Window mapping written out directly from the definition.
fn window_oracle(s: u16, c: f64, w: f64) -> u8 {
    let v = ((s as f64 - (c - w / 2.0)) * 255.0 / w + 0.5).floor();
    v.clamp(0.0, 255.0) as u8
}

#[test]
fn sixteen_bit_stack_is_windowed() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (7u32, 5u32);
    let mut paths = Vec::new();
    let mut raw = Vec::new();
    for z in 0..3u16 {
        let data: Vec<u16> = (0..w * h).map(|i| (i as u16 * 97 + z * 1000) % 4096).collect();
        let p = dir.path().join(format!("s{z}.tif"));
        write_u16(&p, w, h, &data);
        paths.push(p);
        raw.extend(data);
    }
    let v = load_tiff_stack(&paths, DEFAULT_SPACING, None).unwrap();
    assert_eq!(v.dims(), [7, 5, 3]);
    assert_eq!(v.source_bit_depth(), 16);
    assert_eq!(v.window(), Some(Window::DEFAULT));
    for (got, s) in v.intensities().iter().zip(&raw) {
        assert_eq!(*got, window_oracle(*s, 400.0, 1800.0));
    }
    let custom = load_tiff_stack(&paths, DEFAULT_SPACING, Some(Window::new(1000.0, 500.0).unwrap())).unwrap();
    for (got, s) in custom.intensities().iter().zip(&raw) {
        assert_eq!(*got, window_oracle(*s, 1000.0, 500.0));
    }
}

#[test]
fn eight_bit_stack_is_verbatim_and_lzw_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let a: Vec<u8> = (0..48).map(|i| (i * 5) as u8).collect();
    let b: Vec<u8> = (0..48).map(|i| 255 - i as u8).collect();
    let pa = dir.path().join("a.tif");
    let pb = dir.path().join("b.tif");
    write_u8(&pa, 8, 6, &a);
    write_u8_lzw(&pb, 8, 6, &b);
    let v = load_tiff_stack(&[&pa, &pb], [0.5, 0.5, 1.0], None).unwrap();
    assert_eq!(v.window(), None);
    assert_eq!(&v.intensities()[..48], &a[..]);
    assert_eq!(&v.intensities()[48..], &b[..]);
    assert_eq!(v.get(3, 2, 1), b[2 * 8 + 3]);
}

#[test]
fn rejects_bad_stacks() {
    let dir = tempfile::tempdir().unwrap();
    let empty: Vec<PathBuf> = Vec::new();
    assert!(matches!(load_tiff_stack(&empty, DEFAULT_SPACING, None), Err(VolumeError::EmptyStack)));

    let a = dir.path().join("a.tif");
    let b = dir.path().join("b.tif");
    write_u8(&a, 4, 4, &[0; 16]);
    write_u8(&b, 4, 5, &[0; 20]);
    assert!(matches!(
        load_tiff_stack(&[&a, &b], DEFAULT_SPACING, None),
        Err(VolumeError::DimensionMismatch { .. })
    ));

    let c = dir.path().join("c.tif");
    write_u16(&c, 4, 4, &[0; 16]);
    assert!(matches!(
        load_tiff_stack(&[&a, &c], DEFAULT_SPACING, None),
        Err(VolumeError::UnsupportedPixelFormat(_))
    ));

    let rgb = dir.path().join("rgb.tif");
    let mut enc = TiffEncoder::new(File::create(&rgb).unwrap()).unwrap();
    enc.write_image::<colortype::RGB8>(2, 2, &[0; 12]).unwrap();
    assert!(matches!(
        load_tiff_stack(&[&rgb], DEFAULT_SPACING, None),
        Err(VolumeError::UnsupportedPixelFormat(_))
    ));

    let junk = dir.path().join("junk.tif");
    std::fs::write(&junk, b"not a tiff at all").unwrap();
    assert!(matches!(load_tiff_stack(&[&junk], DEFAULT_SPACING, None), Err(VolumeError::DecodeError { .. })));

    assert!(matches!(
        load_tiff_stack(&[&a], DEFAULT_SPACING, Some(Window { center: 0.0, width: 0.0 })),
        Err(VolumeError::InvalidWindow { .. })
    ));
}

#[test]
fn directory_listing_is_lexicographic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["b.tif", "a.TIFF", "c.txt", "a10.tif", "a2.tif"] {
        std::fs::write(dir.path().join(name), b"").unwrap();
    }
    let names: Vec<String> = list_stack_dir(dir.path())
        .unwrap()
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["a.TIFF", "a10.tif", "a2.tif", "b.tif"]);
}

#[test]
fn meta_sidecar_describes_volume() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.tif");
    write_u16(&p, 3, 2, &[0, 1, 2, 3, 4, 5]);
    let v = load_tiff_stack(&[&p], [0.3, 0.3, 0.5], None).unwrap();
    let meta = write_volume_meta(&v, dir.path()).unwrap();
    let text = std::fs::read_to_string(meta).unwrap();
    assert_eq!(text, "dims=3,2,1\nspacing_mm=0.3,0.3,0.5\nwindow=400,1800\nsource_bit_depth=16\n");
    assert_eq!(VolumeMeta::parse(&text).unwrap(), VolumeMeta::of(&v));
}

#[test]
fn cache_serves_decoded_slices() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..20u8)
        .map(|z| {
            let p = dir.path().join(format!("{z:02}.tif"));
            write_u8(&p, 4, 3, &[z; 12]);
            p
        })
        .collect();
    let v = load_tiff_stack(&paths, DEFAULT_SPACING, None).unwrap();
    let mut cache = SliceCache::new(Axis::Axial, 64);
    cache.preload_window(&v, 10, 8).unwrap();
    assert_eq!(cache.resident_indices(), (2..=18).collect::<Vec<_>>());
    assert_eq!(cache.get(&v, 12).unwrap().pixels, vec![12; 12]);
    assert_eq!(cache.decodes(), 17);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mask_export_import_round_trip(nx in 1usize..20, ny in 1usize..20, nz in 1usize..6, seed in any::<u64>()) {
        let mut state = seed | 1;
        let mask = MaskVolume::from_fn([nx, ny, nz], |_, _, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state & 1 == 1
        }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = export_mask_stack(&mask, dir.path(), "mask").unwrap();
        prop_assert_eq!(paths.len(), nz);
        prop_assert_eq!(paths[0].file_name().unwrap().to_str().unwrap(), "mask_0000.tif");
        let back = load_mask_stack(&paths, [nx, ny, nz]).unwrap();
        prop_assert_eq!(back.labels(), mask.labels());
        // the exported slices are ordinary 8-bit scans too
        let scan = load_tiff_stack(&paths, DEFAULT_SPACING, None).unwrap();
        prop_assert_eq!(scan.intensities(), mask.labels());
    }
}

#[test]
fn mask_import_checks_parent_dims() {
    let dir = tempfile::tempdir().unwrap();
    let mask = MaskVolume::empty([3, 3, 2]).unwrap();
    let paths = export_mask_stack(&mask, dir.path(), "m").unwrap();
    assert!(matches!(load_mask_stack(&paths, [3, 3, 3]), Err(VolumeError::DimensionMismatch { .. })));
}
