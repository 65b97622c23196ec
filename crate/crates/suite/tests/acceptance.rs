//! Acceptance run: one PASS/FAIL line per criterion, then a non-zero exit
//! if any failed. Every criterion runs even when an earlier one fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxelink::pipeline::{decimate_best, PipelineConfig};
use voxelink::session::{JobEvent, JobEventBody, Session};
use voxelink_core::annotation::{
    apply_stroke, BrushMode, CanvasPlane, EditJournal, Stroke, StrokeLogEntry, StylusSample,
};
use voxelink_core::mesh::{decimate, DecimationConfig};
use voxelink_core::stack::{encode_gray8_tiff, export_mask_stack, load_mask_stack};
use voxelink_core::surface::{
    extract_isosurface, update_region, CancelToken, DensityGrid, ExtractionProgress, ExtractionState, McConfig,
    RegionUpdate, VoxelBox,
};
use voxelink_core::{Axis, Dims, MaskVolume, SliceRef, Spacing, TriangleMesh, VoxelVolume};
use voxelink_suite::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn extract(grid: &DensityGrid) -> TriangleMesh {
    extract_isosurface(grid, &McConfig::default(), |_| {}, &CancelToken::new()).unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, max: usize, fill: f64) -> MaskVolume {
    let dims = [rng.random_range(1..=max), rng.random_range(1..=max), rng.random_range(1..=max)];
    MaskVolume::from_fn(dims, |_, _, _| rng.random_bool(fill)).unwrap()
}

fn ball(n: usize, r: f64) -> MaskVolume {
    let c = (n as f64 - 1.0) / 2.0;
    MaskVolume::from_fn([n; 3], |x, y, z| {
        (x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2) <= r * r
    })
    .unwrap()
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Watertight, on the iso level, and sphere-like where the input is a
/// single solid; noise grids may carry handles, so there each closed piece
/// only has to have an even characteristic of at most 2.
fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut components = 0;
    for g in 0..200 {
        let fill = rng.random_range(0.1..0.9);
        let mask = random_mask(&mut rng, 12, fill);
        let spacing = [1.0; 3];
        let mesh = extract(&DensityGrid::from_mask(&mask, spacing));
        ensure!(every_edge_twice(&mesh), "grid {g} ({:?}): open edges", mask.dims());
        for p in mesh.vertices() {
            let d = trilinear_label(&mask, spacing, *p);
            worst = worst.max((d - 0.5).abs());
        }
        for chi in component_euler(&mesh) {
            ensure!(chi <= 2 && chi % 2 == 0, "grid {g}: component with chi {chi}");
            components += 1;
        }
    }
    ensure!(worst <= 1e-6, "vertex density off iso by {worst:e}");
    let mut solids = 0;
    for s in 0..50 {
        let dims = [10, 11, 12];
        let lo = [0, 1, 2].map(|a| rng.random_range(0..dims[a]));
        let hi = [0, 1, 2].map(|a| rng.random_range(lo[a] + 1..=dims[a]));
        let mask = MaskVolume::from_fn(dims, |x, y, z| {
            let p = [x, y, z];
            (0..3).all(|a| p[a] >= lo[a] && p[a] < hi[a])
        })
        .unwrap();
        let chis = component_euler(&extract(&DensityGrid::from_mask(&mask, [1.0; 3])));
        ensure!(chis == vec![2], "solid box {s}: chi {chis:?}");
        solids += 1;
    }
    for r in [3.0, 5.5, 8.0] {
        let chis = component_euler(&extract(&DensityGrid::from_mask(&ball(20, r), [1.0; 3])));
        ensure!(chis == vec![2], "ball r {r}: chi {chis:?}");
        solids += 1;
    }
    let elapsed = secs(t);
    ensure!(elapsed < 10.0, "took {elapsed:.2} s");
    Ok(format!(
        "200 grids watertight, {components} components with even chi <= 2, {solids} solids chi = 2, \
         max |density - 0.5| = {worst:.1e}, {elapsed:.2} s"
    ))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let r = 10.0;
    let mesh = extract(&DensityGrid::from_mask(&ball(25, r), [1.0; 3]));
    let area = surface_area(&mesh);
    let volume = enclosed_volume(&mesh);
    let (a0, v0) = (4.0 * PI * r * r, 4.0 / 3.0 * PI * r.powi(3));
    let (ea, ev) = ((area - a0) / a0, (volume - v0) / v0);
    let elapsed = secs(t);
    let detail = format!(
        "area {area:.1} vs {a0:.1} ({:+.2}%), volume {volume:.1} vs {v0:.1} ({:+.2}%), {elapsed:.2} s",
        ea * 100.0,
        ev * 100.0
    );
    ensure!(ea.abs() <= 0.05, "area outside 5%: {detail}");
    ensure!(ev.abs() <= 0.05, "volume outside 5%: {detail}");
    ensure!(elapsed < 5.0, "too slow: {detail}");
    Ok(detail)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = McConfig::default();
    let mut triangles = 0;
    for e in 0..100 {
        let fill = rng.random_range(0.2..0.7);
        let mut mask = random_mask(&mut rng, 16, fill);
        let spacing = [rng.random_range(0.2..1.5), rng.random_range(0.2..1.5), rng.random_range(0.2..1.5)];
        let mut grid = DensityGrid::from_mask(&mask, spacing);
        let mut state = ExtractionState::build(&grid, &cfg, &mut |_| {}, &CancelToken::new()).unwrap();
        let d = mask.dims();
        let v = [rng.random_range(0..d[0]), rng.random_range(0..d[1]), rng.random_range(0..d[2])];
        mask.set(v[0], v[1], v[2], 255 - mask.get(v[0], v[1], v[2]));
        grid.refresh_from_mask(&mask, VoxelBox::voxel(v));
        let incremental = update_region(&grid, &mut state, VoxelBox::voxel(v)).map_err(|e| e.to_string())?;
        let batch = extract(&DensityGrid::from_mask(&mask, spacing));
        ensure!(
            triangle_multiset(&incremental) == triangle_multiset(&batch),
            "edit {e} at {v:?} in {d:?}: {} vs {} triangles",
            incremental.triangle_count(),
            batch.triangle_count()
        );
        triangles += batch.triangle_count();
    }
    Ok(format!("100 single-voxel edits, {triangles} triangles compared exactly"))
}

/// Keep-ratio 0.25 on a sphere: the binary marching-cubes sphere (whose
/// staircase facets decimate almost for free) and a smooth UV sphere.
fn criterion_4() -> Outcome {
    let r = 20.0;
    let spheres = [
        ("marching-cubes sphere", extract(&DensityGrid::from_mask(&ball(45, r), [1.0; 3]))),
        ("uv sphere", uv_sphere(r, 72, 80)),
    ];
    let mut details = Vec::new();
    for (name, sphere) in spheres {
        let before = sphere.triangle_count();
        ensure!(before >= 10_000, "{name} has only {before} triangles");
        let t = Instant::now();
        let reduced = decimate(&sphere, &DecimationConfig::default()).map_err(|e| format!("{name}: {e}"))?;
        let elapsed = secs(t);
        let after = reduced.triangle_count();
        let reduction = 1.0 - after as f64 / before as f64;
        let h = sampled_hausdorff(&sphere, &reduced);
        let detail = format!(
            "{name} {before} -> {after} triangles ({:.1}% reduction), Hausdorff {h:.2e} mm = {:.3}% of r, \
             decimation {elapsed:.2} s",
            reduction * 100.0,
            h / r * 100.0
        );
        ensure!((reduction - 0.75).abs() <= 0.05, "{detail}");
        ensure!(h <= 0.02 * r, "{detail}");
        ensure!(elapsed < 10.0, "{detail}");
        details.push(detail);
    }
    Ok(details.join("; "))
}

fn random_pose(rng: &mut ChaCha8Rng, pw: usize, ph: usize) -> Pose {
    let rv = |rng: &mut ChaCha8Rng| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let u = unit(rv(rng));
    let v = unit(cross(cross(u, rv(rng)), u));
    Pose {
        origin: [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)],
        u,
        v,
        w_mm: rng.random_range(5.0..60.0),
        h_mm: rng.random_range(5.0..60.0),
        pw,
        ph,
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut painted = 0;
    for id in 0..1000u64 {
        let (pw, ph) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let pose = random_pose(&mut rng, pw, ph);
        let depth = rng.random_range(1..4);
        let axis = Axis::ALL[rng.random_range(0..3)];
        let dims: Dims = match axis {
            Axis::Axial => [pw, ph, depth],
            Axis::Coronal => [pw, depth, ph],
            Axis::Sagittal => [depth, pw, ph],
        };
        let slice = SliceRef::new(axis, rng.random_range(0..depth));
        let canvas = CanvasPlane::new(pose.origin, pose.u, pose.v, pose.w_mm, pose.h_mm, slice, (pw, ph)).unwrap();
        let r = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..=8.0) };
        let n = cross(pose.u, pose.v);
        let raw: Vec<(P3, P3, bool)> = (0..rng.random_range(1..8))
            .map(|_| {
                let target = pose.world(rng.random_range(-0.1..1.1) * pw as f64, rng.random_range(-0.1..1.1) * ph as f64);
                let back = rng.random_range(5.0..200.0);
                let tilt = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
                let tip = [0, 1, 2].map(|i| target[i] + back * (n[i] + tilt[i]));
                (tip, unit(sub(target, tip)), rng.random_bool(0.9))
            })
            .collect();
        let samples: Vec<StylusSample> = raw
            .iter()
            .enumerate()
            .map(|(k, &(tip, dir, pressed))| StylusSample::new(tip, dir, k as f64 * 8.0, pressed).unwrap())
            .collect();
        let stroke = Stroke::new(id, BrushMode::Additive, r, samples).unwrap();
        let mut mask = MaskVolume::empty(dims).unwrap();
        apply_stroke(&mut mask, &canvas, &stroke).map_err(|e| format!("stroke {id}: {e}"))?;
        let got: BTreeSet<(usize, usize)> = (0..ph)
            .flat_map(|y| (0..pw).map(move |x| (x, y)))
            .filter(|&(x, y)| mask.get_pixel(slice, x, y) == 255)
            .collect();
        let want = rasterize_runs(pw, ph, &pose.runs(&raw), r);
        ensure!(
            got == want,
            "stroke {id} (r {r}, {pw}x{ph}): {} pixels vs oracle {}",
            got.len(),
            want.len()
        );
        ensure!(mask.foreground_count() == got.len(), "stroke {id} painted outside its slice");
        painted += got.len();
    }
    Ok(format!("1000 strokes, {painted} pixels, exact set equality"))
}

/// Paints a straight-down stroke on an axial canvas with the reference
/// rasterizer. Returns whether any pixel changed.
fn oracle_apply(mask: &mut MaskVolume, slice: SliceRef, stroke: &Stroke) -> bool {
    let d = mask.dims();
    let pose = Pose {
        origin: [0.0; 3],
        u: [1.0, 0.0, 0.0],
        v: [0.0, 1.0, 0.0],
        w_mm: d[0] as f64,
        h_mm: d[1] as f64,
        pw: d[0],
        ph: d[1],
    };
    let raw: Vec<(P3, P3, bool)> = stroke.samples.iter().map(|s| (s.tip, s.direction(), s.pressed)).collect();
    let label = stroke.mode.target_label();
    let mut changed = false;
    for (x, y) in rasterize_runs(d[0], d[1], &pose.runs(&raw), stroke.radius_px) {
        if mask.get_pixel(slice, x, y) != label {
            mask.set_pixel(slice, x, y, label);
            changed = true;
        }
    }
    changed
}

fn criterion_6() -> Outcome {
    let dims = [20, 16, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut undos, mut redos, mut applies) = (0, 0, 0);
    for seq in 0..20 {
        let mut mask = MaskVolume::empty(dims).unwrap();
        let mut journal = EditJournal::default();
        // model: effective edits in order, how many are live, and how far
        // back undo may reach
        let mut history: Vec<(SliceRef, Stroke)> = Vec::new();
        let (mut live, mut floor) = (0usize, 0usize);
        let mut shadow = MaskVolume::empty(dims).unwrap();
        for op in 0..200u64 {
            match rng.random_range(0..10) {
                0..=5 => {
                    let slice = SliceRef::new(Axis::Axial, rng.random_range(0..dims[2]));
                    let canvas = CanvasPlane::for_slice(dims, [1.0; 3], slice);
                    let samples = (0..rng.random_range(1..4))
                        .map(|k| {
                            let tip = [rng.random_range(0.0..20.0), rng.random_range(0.0..16.0), 3.0];
                            StylusSample::new(tip, [0.0, 0.0, -1.0], k as f64, true).unwrap()
                        })
                        .collect();
                    let mode = if rng.random_bool(0.7) { BrushMode::Additive } else { BrushMode::Subtractive };
                    let stroke = Stroke::new(op, mode, rng.random_range(0.0..3.0), samples).unwrap();
                    let record = apply_stroke(&mut mask, &canvas, &stroke).map_err(|e| e.to_string())?;
                    if !record.is_empty() {
                        journal.push(record);
                    }
                    if oracle_apply(&mut shadow, slice, &stroke) {
                        history.truncate(live);
                        history.push((slice, stroke));
                        live += 1;
                        floor = floor.max(live.saturating_sub(journal.depth()));
                    }
                    applies += 1;
                }
                6..=7 => {
                    let did = journal.undo(&mut mask).is_some();
                    ensure!(did == (live > floor), "seq {seq} op {op}: undo availability {did}");
                    if did {
                        live -= 1;
                    }
                    undos += 1;
                }
                _ => {
                    let did = journal.redo(&mut mask).is_some();
                    ensure!(did == (live < history.len()), "seq {seq} op {op}: redo availability {did}");
                    if did {
                        live += 1;
                    }
                    redos += 1;
                }
            }
            let mut replay = MaskVolume::empty(dims).unwrap();
            for (slice, stroke) in &history[..live] {
                oracle_apply(&mut replay, *slice, stroke);
            }
            ensure!(mask.labels() == replay.labels(), "seq {seq} op {op}: mask differs from replay");
            shadow = replay;
        }
    }
    Ok(format!(
        "20 sequences x 200 ops ({applies} applies, {undos} undos, {redos} redos), bit-exact after every op"
    ))
}

fn write_stack(dir: &Path, dims: Dims) {
    std::fs::create_dir_all(dir).unwrap();
    for z in 0..dims[2] {
        let px: Vec<u8> = (0..dims[0] * dims[1]).map(|i| ((i * 7 + z * 13) % 256) as u8).collect();
        std::fs::write(dir.join(format!("s_{z:04}.tif")), encode_gray8_tiff(dims[0] as u32, dims[1] as u32, &px)).unwrap();
    }
}

fn axial_stroke(dims: Dims, spacing: Spacing, z: usize, id: u64, radius: f64, pts: &[[f64; 2]]) -> (CanvasPlane, Stroke) {
    let canvas = CanvasPlane::for_slice(dims, spacing, SliceRef::new(Axis::Axial, z));
    let samples = pts
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let w = canvas.world_point(*p);
            StylusSample::new([w[0], w[1], w[2] + 10.0], [0.0, 0.0, -1.0], k as f64 * 8.0, true).unwrap()
        })
        .collect();
    let stroke = Stroke::new(id, BrushMode::Additive, radius, samples).unwrap();
    (canvas, stroke)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tmp = tempfile::tempdir().unwrap();
    let mut voxels = 0;
    for m in 0..50 {
        let fill = rng.random_range(0.0..1.0);
        let dims = [rng.random_range(1..40), rng.random_range(1..40), rng.random_range(1..8)];
        let mask = MaskVolume::from_fn(dims, |_, _, _| rng.random_bool(fill)).unwrap();
        let dir = tmp.path().join(format!("m{m}"));
        let paths = export_mask_stack(&mask, &dir, "mask").map_err(|e| e.to_string())?;
        let back = load_mask_stack(&paths, dims).map_err(|e| e.to_string())?;
        ensure!(back.labels() == mask.labels(), "mask {m} ({dims:?}) changed in the round trip");
        voxels += mask.labels().len();
    }

    let dims = [40, 36, 10];
    let stack = tmp.path().join("stack");
    write_stack(&stack, dims);
    let log: String = (2..8)
        .map(|z| {
            let (c, s) = axial_stroke(dims, [0.3, 0.3, 0.5], z, z as u64, 4.0, &[[12.0, 10.0], [25.0, 20.0], [28.0, 27.0]]);
            StrokeLogEntry::new(&c, &s).to_json_line() + "\n"
        })
        .collect();
    let log_path = tmp.path().join("strokes.jsonl");
    std::fs::write(&log_path, log).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let code = voxelink::cli::main_with_args([
            "voxelink".as_ref(),
            "run".as_ref(),
            "--stack".as_ref(),
            stack.as_os_str(),
            "--strokes".as_ref(),
            log_path.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ] as [&std::ffi::OsStr; 8]);
        ensure!(code == 0, "cli run {run} exited with {code}");
        outputs.push(dir_bytes(&out));
    }
    ensure!(outputs[0] == outputs[1], "cli exports differ between runs");
    let bytes: usize = outputs[0].iter().map(|(_, b)| b.len()).sum();
    ensure!(
        outputs[0].iter().any(|(n, b)| n == "mesh.stl" && b.len() > 84),
        "cli export has an empty mesh"
    );
    Ok(format!(
        "50 masks ({voxels} voxels) round-trip bit-exact; 2 CLI runs byte-identical ({} files, {bytes} bytes)",
        outputs[0].len()
    ))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn criterion_8() -> Outcome {
    let dims = [512, 512, 100];
    let spacing = [0.3, 0.3, 0.5];
    let (c, rad) = ([255.5, 255.5, 49.5], [180.0, 140.0, 42.0]);
    let inside = |x: f64, y: f64, z: f64| {
        ((x - c[0]) / rad[0]).powi(2) + ((y - c[1]) / rad[1]).powi(2) + ((z - c[2]) / rad[2]).powi(2) <= 1.0
    };
    let mut mask = MaskVolume::from_fn(dims, |x, y, z| inside(x as f64, y as f64, z as f64)).unwrap();
    let cfg = McConfig::default();

    let t = Instant::now();
    let mut grid = DensityGrid::from_mask(&mask, spacing);
    let mut state = ExtractionState::build(&grid, &cfg, &mut |_| {}, &CancelToken::new()).unwrap();
    let full = state.mesh(&grid);
    let extract_s = secs(t);
    let t = Instant::now();
    let reduced = decimate_best(&full, &DecimationConfig::default()).map_err(|e| e.to_string())?;
    let decimate_s = secs(t);

    let mut latencies = Vec::new();
    for i in 0..20 {
        let z = 15 + 3 * i;
        let s = (1.0 - ((z as f64 - c[2]) / rad[2]).powi(2)).max(0.0).sqrt();
        let theta = i as f64 * 0.9;
        let at = |d: f64| {
            [c[0] + 0.5 + (rad[0] * s + d) * theta.cos(), c[1] + 0.5 + (rad[1] * s + d) * theta.sin()]
        };
        let (canvas, stroke) = axial_stroke(dims, spacing, z, i as u64, 6.0, &[at(-3.0), at(4.0)]);
        let t = Instant::now();
        let record = apply_stroke(&mut mask, &canvas, &stroke).map_err(|e| e.to_string())?;
        let (a, b) = record.voxel_bounds().ok_or("edit changed nothing")?;
        let region = VoxelBox::from_inclusive(a, b);
        grid.refresh_from_mask(&mask, region);
        state.update(&grid, region).map_err(|e| e.to_string())?;
        let patch = state.patch_mesh(&grid, region);
        let patch_reduced = decimate_best(&patch, &DecimationConfig::default()).map_err(|e| e.to_string())?;
        latencies.push(t.elapsed().as_secs_f64() * 1000.0);
        ensure!(
            !patch.is_empty() && patch_reduced.triangle_count() <= patch.triangle_count(),
            "edit {i}: empty patch"
        );
    }
    // the incrementally maintained surface is still the batch surface
    let rebuilt = extract(&DensityGrid::from_mask(&mask, spacing));
    ensure!(
        triangle_multiset(&state.mesh(&grid)) == triangle_multiset(&rebuilt),
        "incremental state drifted from batch extraction"
    );

    let max = latencies.iter().cloned().fold(0.0, f64::max);
    let med = median(&mut latencies);
    let full_s = extract_s + decimate_s;
    let detail = format!(
        "edit latency median {med:.1} ms (max {max:.1} ms) over 20 edits; full extraction {extract_s:.2} s + \
         decimation {decimate_s:.2} s = {full_s:.2} s ({} -> {} triangles, advisory bound 10 s {})",
        full.triangle_count(),
        reduced.triangle_count(),
        if full_s < 10.0 { "met" } else { "missed" }
    );
    ensure!(med < 200.0, "{detail}");
    Ok(detail)
}

/// Cancels from inside the progress callback after `after` reports.
fn cancel_after(after: usize, token: &CancelToken) -> impl FnMut(ExtractionProgress) + '_ {
    let mut seen = 0;
    move |p: ExtractionProgress| {
        if !p.cancelled {
            seen += 1;
            if seen == after {
                token.cancel();
            }
        }
    }
}

fn wait_settled(session: &Session, rt: &tokio::runtime::Runtime) -> Vec<JobEvent> {
    rt.block_on(async {
        let deadline = Instant::now() + Duration::from_secs(60);
        loop {
            assert!(Instant::now() < deadline, "session never settled");
            let before = session.event_log().len();
            tokio::time::sleep(Duration::from_millis(250)).await;
            let log = session.event_log();
            if session.info().active_job.is_none() && log.len() == before && log.last().is_some_and(JobEvent::is_terminal) {
                return log;
            }
        }
    })
}

fn criterion_9() -> Outcome {
    // library level: a full build and a region update, each cancelled from
    // inside the progress callback
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mask = MaskVolume::from_fn([64, 64, 64], |_, _, _| rng.random_bool(0.3)).unwrap();
    let grid = DensityGrid::from_mask(&mask, [1.0; 3]);
    let yield_interval = 1000u64;
    let cfg = McConfig {
        yield_interval: yield_interval as usize,
        ..McConfig::default()
    };
    let token = CancelToken::new();
    let mut reports = Vec::new();
    let mut stop = cancel_after(5, &token);
    let built = ExtractionState::build(
        &grid,
        &cfg,
        &mut |p| {
            reports.push(p);
            stop(p)
        },
        &token,
    );
    let Err((_, p)) = built else {
        return Err("build ignored the cancel request".into());
    };
    let last = reports.iter().filter(|r| !r.cancelled).map(|r| r.cubes_done).max().unwrap_or(0);
    ensure!(p.cancelled && p.cubes_done < p.cubes_total, "build did not stop: {p:?}");
    ensure!(p.cubes_done <= last + yield_interval, "build ran {} cubes past the cancel", p.cubes_done - last);

    let mut state = ExtractionState::build(&grid, &cfg, &mut |_| {}, &CancelToken::new()).unwrap();
    let token = CancelToken::new();
    let mut last_update = 0;
    let mut stop = cancel_after(3, &token);
    let region = VoxelBox::new([0, 0, 10], [64, 64, 30]);
    let updated = state
        .update_observed(
            &grid,
            region,
            yield_interval as usize,
            &mut |p| {
                if !p.cancelled {
                    last_update = p.cubes_done;
                }
                stop(p)
            },
            &token,
        )
        .map_err(|e| e.to_string())?;
    let RegionUpdate::Cancelled(q) = updated else {
        return Err("region update ignored the cancel request".into());
    };
    ensure!(q.cubes_done <= last_update + yield_interval, "update ran past its chunk: {q:?}");

    // service level: an edit cancels the running initial build
    let rt = tokio::runtime::Runtime::new().unwrap();
    let _guard = rt.enter();
    let dims = [160, 160, 96];
    let volume = VoxelVolume::from_fn(dims, [0.3, 0.3, 0.5], |x, y, z| ((x + y + z) % 256) as u8).unwrap();
    let mut pipeline = PipelineConfig::default();
    pipeline.mc.yield_interval = 500;
    let session_mask = MaskVolume::for_volume(&volume);
    let session = Session::start("acceptance".into(), volume, session_mask, pipeline, 64).map_err(|e| e.to_string())?;
    let deadline = Instant::now() + Duration::from_secs(20);
    while !session.event_log().iter().any(|e| matches!(e.body, JobEventBody::Progress(_))) {
        ensure!(Instant::now() < deadline, "no progress from the initial job");
        std::thread::sleep(Duration::from_micros(200));
    }
    let (canvas, stroke) = axial_stroke(dims, [0.3, 0.3, 0.5], 40, 1, 5.0, &[[80.0, 80.0], [90.0, 84.0]]);
    let edit = session
        .apply_stroke(&StrokeLogEntry::new(&canvas, &stroke))
        .map_err(|e| e.to_string())?;
    ensure!(edit.changed_count > 0, "edit changed nothing");
    let log = wait_settled(&session, &rt);

    let mut jobs: Vec<u64> = log.iter().map(|e| e.job_id).collect();
    jobs.dedup();
    for &job in &jobs {
        let events: Vec<&JobEvent> = log.iter().filter(|e| e.job_id == job).collect();
        let terminals = events.iter().filter(|e| e.is_terminal()).count();
        ensure!(terminals == 1, "job {job} emitted {terminals} terminal events");
        ensure!(events.last().unwrap().is_terminal(), "job {job} emitted events after finishing");
    }
    let first: Vec<&JobEvent> = log.iter().filter(|e| e.job_id == jobs[0]).collect();
    let JobEventBody::Cancelled(c) = &first.last().unwrap().body else {
        return Err("initial job finished before the edit arrived".into());
    };
    let last_progress = first
        .iter()
        .filter_map(|e| match &e.body {
            JobEventBody::Progress(p) => Some(p.cubes_done),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    ensure!(c.cubes_done <= last_progress + 500, "service job ran past its chunk: {c:?}");
    ensure!(
        matches!(log.last().unwrap().body, JobEventBody::Done(_)),
        "no job completed after the cancel"
    );
    Ok(format!(
        "build stopped {} cubes after the last report (chunk {yield_interval}), update {} after, \
         service job cancelled at {}/{} cubes ({} after last report, chunk 500); {} jobs, one terminal event each",
        p.cubes_done - last,
        q.cubes_done - last_update,
        c.cubes_done,
        c.cubes_total,
        c.cubes_done - last_progress,
        jobs.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("marching-cubes oracle", criterion_1),
        ("sphere geometry", criterion_2),
        ("incremental equals batch", criterion_3),
        ("decimation budget", criterion_4),
        ("rasterization oracle", criterion_5),
        ("journal soundness", criterion_6),
        ("i/o round trips", criterion_7),
        ("latency budget", criterion_8),
        ("chunked cancellation", criterion_9),
    ];
    let quiet_panics = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let wall = secs(t);
        match outcome {
            Ok(detail) => println!("criterion {n} PASS  {name}: {detail} [{wall:.2} s]"),
            Err(detail) => {
                println!("criterion {n} FAIL  {name}: {detail} [{wall:.2} s]");
                failed.push(n);
            }
        }
    }
    std::panic::set_hook(quiet_panics);
    if failed.is_empty() {
        println!("acceptance: all 9 criteria passed");
    } else {
        println!("acceptance: {} of 9 failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
