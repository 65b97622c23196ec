use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxelink_core::mesh::{
    compute_vertex_quadrics, decimate, decimate_observed, decimate_traced, dedupe_vertices, triangle_area,
    DecimationConfig,
};
use voxelink_core::surface::{extract_isosurface, CancelToken, DensityGrid, McConfig};
use voxelink_core::{MaskVolume, MeshError, TriangleMesh};

type P = [f64; 3];

fn sub(a: P, b: P) -> P {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: P, b: P) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn add_scaled(a: P, b: P, s: f64) -> P {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
fn closest_on_triangle(p: P, a: P, b: P, c: P) -> P {
    let (ab, ac, ap) = (sub(b, a), sub(c, a), sub(p, a));
    let (d1, d2) = (dot(ab, ap), dot(ac, ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let (d3, d4) = (dot(ab, bp), dot(ac, bp));
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return add_scaled(a, ab, d1 / (d1 - d3));
    }
    let cp = sub(p, c);
    let (d5, d6) = (dot(ab, cp), dot(ac, cp));
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return add_scaled(a, ac, d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return add_scaled(b, sub(c, b), (d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    add_scaled(add_scaled(a, ab, vb * denom), ac, vc * denom)
}

fn dist_to_mesh(p: P, m: &TriangleMesh) -> f64 {
    (0..m.triangle_count())
        .map(|t| {
            let [a, b, c] = m.triangle_points(t);
            let q = closest_on_triangle(p, a, b, c);
            dot(sub(p, q), sub(p, q))
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

fn samples(m: &TriangleMesh, per_tri: usize, rng: &mut ChaCha8Rng) -> Vec<P> {
    let mut out: Vec<P> = m.vertices().to_vec();
    for t in 0..m.triangle_count() {
        let [a, b, c] = m.triangle_points(t);
        for _ in 0..per_tri {
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            out.push(add_scaled(add_scaled(a, sub(b, a), u), sub(c, a), v));
        }
    }
    out
}

fn hausdorff(a: &TriangleMesh, b: &TriangleMesh, rng: &mut ChaCha8Rng) -> f64 {
    let ab = samples(a, 1, rng).into_iter().map(|p| dist_to_mesh(p, b)).fold(0.0, f64::max);
    let ba = samples(b, 1, rng).into_iter().map(|p| dist_to_mesh(p, a)).fold(0.0, f64::max);
    ab.max(ba)
}

fn ball_mesh(r: f64) -> TriangleMesh {
    let n = (2.0 * r) as usize + 5;
    let c = (n as f64 - 1.0) / 2.0;
    let mask = MaskVolume::from_fn([n; 3], |x, y, z| {
        (x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2) <= r * r
    })
    .unwrap();
    extract_isosurface(&DensityGrid::from_mask(&mask, [1.0; 3]), &McConfig::default(), |_| {}, &CancelToken::new())
        .unwrap()
}

fn blob_mesh(seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = [rng.random_range(3..8), rng.random_range(3..8), rng.random_range(3..8)];
    let fill = rng.random_range(0.3..0.8);
    let mask = MaskVolume::from_fn(d, |_, _, _| rng.random_bool(fill)).unwrap();
    extract_isosurface(&DensityGrid::from_mask(&mask, [0.4, 0.5, 0.7]), &McConfig::default(), |_| {}, &CancelToken::new())
        .unwrap()
}

fn planar_grid(n: u32) -> TriangleMesh {
    let mut v = Vec::new();
    for y in 0..=n {
        for x in 0..=n {
            v.push([x as f64 * 0.5, y as f64 * 0.5, 2.0]);
        }
    }
    let id = |x: u32, y: u32| y * (n + 1) + x;
    let mut t = Vec::new();
    for y in 0..n {
        for x in 0..n {
            t.push([id(x, y), id(x + 1, y), id(x + 1, y + 1)]);
            t.push([id(x, y), id(x + 1, y + 1), id(x, y + 1)]);
        }
    }
    TriangleMesh::new(v, t)
}

#[test]
fn planar_grid_quarter_stays_flat() {
    let m = planar_grid(20);
    let d = decimate(&m, &DecimationConfig::default()).unwrap();
    assert!(d.triangle_count() * 4 <= m.triangle_count(), "{} of {}", d.triangle_count(), m.triangle_count());
    let dev = d.vertices().iter().map(|p| (p[2] - 2.0).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-6, "deviation {dev}");
    assert!((d.area() - 100.0).abs() < 1e-6);
}

#[test]
fn sphere_quarter_within_two_percent_hausdorff() {
    let r = 20.0;
    let m = ball_mesh(r);
    assert!(m.triangle_count() >= 10_000);
    let d = decimate(&m, &DecimationConfig::default()).unwrap();
    let kept = d.triangle_count() as f64 / m.triangle_count() as f64;
    assert!((0.20..=0.25).contains(&kept), "kept {kept}");
    let h = hausdorff(&m, &d, &mut ChaCha8Rng::seed_from_u64(1));
    assert!(h <= 0.02 * r, "hausdorff {h}");
    assert!(d.is_watertight());
    assert_eq!(d.euler_characteristic(), 2);
}

#[test]
fn decimation_is_deterministic() {
    let m = ball_mesh(8.0);
    let cfg = DecimationConfig::default();
    assert_eq!(decimate(&m, &cfg).unwrap(), decimate(&m, &cfg).unwrap());
}

#[test]
fn quadric_matches_point_plane_sums() {
    let m = ball_mesh(6.0);
    let q = compute_vertex_quadrics(&m).quadrics;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for v in (0..m.vertex_count()).step_by(7) {
        let p = add_scaled(m.vertices()[v], [rng.random(), rng.random(), rng.random()], 0.8);
        let mut want = 0.0;
        for t in 0..m.triangle_count() {
            if !m.triangles()[t].contains(&(v as u32)) {
                continue;
            }
            let [a, b, c] = m.triangle_points(t);
            let n = {
                let (u, w) = (sub(b, a), sub(c, a));
                [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]]
            };
            let len = dot(n, n).sqrt();
            let dist = dot(sub(p, a), n) / len;
            want += triangle_area([a, b, c]) * dist * dist;
        }
        let got = q[v].evaluate(p);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn every_acceptance_is_the_cheapest_valid_candidate() {
    for seed in 0..12 {
        let m = blob_mesh(seed);
        if m.triangle_count() < 8 {
            continue;
        }
        let mut audited = 0;
        let (_, trace) = decimate_observed(&m, &DecimationConfig::default(), |view| {
            let cheapest = view
                .candidates()
                .into_iter()
                .filter(|(_, valid)| *valid)
                .map(|(c, _)| c.cost)
                .fold(f64::INFINITY, f64::min);
            assert!(
                view.accepted.cost <= cheapest + 1e-9 * cheapest.abs().max(1.0),
                "accepted {} while {} was available",
                view.accepted.cost,
                cheapest
            );
            audited += 1;
        });
        assert_eq!(audited, trace.accepted_costs.len());
    }
}

#[test]
fn unreachable_target_returns_best_mesh() {
    // two tetrahedra: each closed component bottoms out at 4 triangles
    let mut v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    v.extend(v.clone().iter().map(|p| [p[0] + 5.0, p[1], p[2]]));
    let t = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3], [4, 6, 5], [4, 5, 7], [4, 7, 6], [5, 6, 7]];
    let m = TriangleMesh::new(v, t);
    match decimate(&m, &DecimationConfig::default()) {
        Err(MeshError::TargetUnreachable { best, achieved, target }) => {
            assert_eq!((achieved, target), (8, 2));
            assert_eq!(best.triangle_count(), 8);
        }
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decimation_invariants(seed in any::<u64>(), ratio in 0.05f64..1.0) {
        let m = blob_mesh(seed);
        let cfg = DecimationConfig { target_ratio: ratio, ..Default::default() };
        let target = (ratio * m.triangle_count() as f64).ceil() as usize;
        let (res, trace) = decimate_traced(&m, &cfg);
        let out = match res {
            Ok(out) => {
                prop_assert!(out.triangle_count() <= target);
                out
            }
            Err(MeshError::TargetUnreachable { best, .. }) => *best,
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        prop_assert_eq!(trace.achieved, out.triangle_count());
        for t in 0..out.triangle_count() {
            prop_assert!(triangle_area(out.triangle_points(t)) > 1e-12);
        }
        // closed input components stay closed with the same genus
        let mut before: Vec<i64> = m.components().iter().map(TriangleMesh::euler_characteristic).collect();
        let mut after: Vec<i64> = out.components().iter().map(TriangleMesh::euler_characteristic).collect();
        before.sort_unstable();
        after.sort_unstable();
        prop_assert_eq!(before, after);
        prop_assert!(out.is_watertight());
        let again = decimate_traced(&m, &cfg).0.or_else(MeshError::into_best).unwrap();
        prop_assert_eq!(again, out);
    }

    #[test]
    fn dedupe_is_idempotent(seed in any::<u64>(), eps in prop_oneof![Just(0.0), 1e-6f64..0.3]) {
        let m = blob_mesh(seed);
        // split into a triangle soup first
        let soup_v: Vec<P> = (0..m.triangle_count()).flat_map(|t| m.triangle_points(t)).collect();
        let soup_t: Vec<[u32; 3]> = (0..m.triangle_count() as u32).map(|t| [3 * t, 3 * t + 1, 3 * t + 2]).collect();
        let soup = TriangleMesh::new(soup_v, soup_t);
        let once = dedupe_vertices(&soup, eps);
        prop_assert_eq!(dedupe_vertices(&once, eps), once.clone());
        if eps == 0.0 {
            prop_assert_eq!(once.canonical_triangles(), m.canonical_triangles());
            prop_assert_eq!(once.vertex_count(), m.vertex_count());
        }
    }
}
