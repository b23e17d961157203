//! Property checks shared by the proptest suite and the acceptance sweep.

use std::f64::consts::TAU;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use videpth::enrich::{estimate_plane_distance, estimate_plane_normal, sample_enriched};
use videpth::gravity::{
    roll_angle, rot_z, warp_normals, warp_sparse_depth, GravityVector, RollWarp,
};
use videpth::metrics::{eval_depth, NormalAccumulator};
use videpth::refine::{fit_plane_ransac, region_grow};
use videpth::{
    CameraIntrinsics, DepthImage, EnrichConfig, IncompleteDepth, NormalMap, Pixel, Plane, Point3,
    RefineConfig, SparseDepth, Vector3,
};

use super::{jitter, rng};

pub type PropResult = Result<(), TestCaseError>;

pub fn k() -> CameraIntrinsics {
    CameraIntrinsics::new(100.0, 100.0, 160.0, 120.0, 320, 240).unwrap()
}

fn k_tiny() -> CameraIntrinsics {
    CameraIntrinsics::new(40.0, 40.0, 20.0, 15.0, 40, 30).unwrap()
}

pub fn projection_roundtrip(u: usize, v: usize, z: f64) -> PropResult {
    let k = k();
    let b = k.backproject(u as i64, v as i64).unwrap();
    let sd = k.project_points(&[b.at_depth(z)]);
    prop_assert_eq!(sd.len(), 1);
    let (p, zz) = sd.entries()[0];
    prop_assert_eq!(p, Pixel::new(u, v));
    prop_assert!((zz - z).abs() < 1e-9);
    Ok(())
}

pub fn cloud_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-6.0..6.0f64, -5.0..5.0f64, -2.0..10.0f64), 0..200)
}

pub fn projection_invariants(cloud: Vec<(f64, f64, f64)>, shuffle_seed: u64) -> PropResult {
    let k = k();
    let pts: Vec<Point3<f64>> = cloud.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
    let sd = k.project_points(&pts);
    for w in sd.entries().windows(2) {
        prop_assert!(w[0].0 < w[1].0);
    }
    for &(p, z) in sd.entries() {
        prop_assert!(p.u < k.width && p.v < k.height && z > 0.0);
    }
    let mut shuffled = pts.clone();
    let mut r = rng(shuffle_seed);
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, r.random_range(0..=i));
    }
    prop_assert_eq!(k.project_points(&shuffled), sd);
    Ok(())
}

fn nondegenerate(gx: f64, gy: f64, gz: f64) -> Option<GravityVector> {
    let g = GravityVector::new(Vector3::new(gx, gy, gz)).ok()?;
    let v = g.as_vector();
    (v.x.hypot(v.y) >= 0.06).then_some(g)
}

pub fn roll_equivariance(gx: f64, gy: f64, gz: f64, alpha: f64) -> PropResult {
    let Some(g) = nondegenerate(gx, gy, gz) else {
        return Ok(());
    };
    let rotated = GravityVector::new(rot_z(alpha) * g.as_vector()).unwrap();
    let diff = (roll_angle(&g).unwrap() - alpha - roll_angle(&rotated).unwrap()).rem_euclid(TAU);
    prop_assert!(diff.min(TAU - diff) < 1e-9);
    Ok(())
}

pub fn roll_alignment(gx: f64, gy: f64, gz: f64) -> PropResult {
    let Some(g) = nondegenerate(gx, gy, gz) else {
        return Ok(());
    };
    let w = videpth::gravity::build_roll_warp(&g, &k()).unwrap();
    let aligned = w.rotation() * g.as_vector();
    prop_assert!(aligned.x.abs() < 1e-9 && aligned.y > 0.0);
    Ok(())
}

pub fn warp_roundtrip(angle: f64, u: f64, v: f64) -> PropResult {
    let w = RollWarp::from_angle(angle, k());
    let (x, y) = w.forward(u, v);
    let (u2, v2) = w.inverse_map(x, y);
    prop_assert!((u2 - u).abs() < 1e-9 && (v2 - v).abs() < 1e-9);
    Ok(())
}

pub fn sparse_warp_preserves_depths(angle: f64, seed: u64) -> PropResult {
    let k = k();
    let mut r = rng(seed);
    let entries: std::collections::BTreeMap<(i64, i64), f64> = (0..60)
        .map(|_| ((r.random_range(0..320), r.random_range(0..240)), r.random_range(0.3..15.0)))
        .collect();
    let sd = SparseDepth::new(320, 240, entries.iter().map(|(&(u, v), &z)| (u, v, z))).unwrap();
    let out = warp_sparse_depth(&sd, &RollWarp::from_angle(angle, k));
    prop_assert!(out.len() <= sd.len());
    let depths: Vec<u64> = sd.entries().iter().map(|e| e.1.to_bits()).collect();
    for (_, z) in out.entries() {
        prop_assert!(depths.contains(&z.to_bits()));
    }
    Ok(())
}

pub fn warped_normals_are_unit(angle: f64, seed: u64) -> PropResult {
    let k = k_tiny();
    let mut r = rng(seed);
    let nm = NormalMap::from_fn(k.width, k.height, |_| {
        if r.random_bool(0.1) {
            Vector3::zeros()
        } else {
            super::random_unit(&mut r)
        }
    });
    let out = warp_normals(&nm, &RollWarp::from_angle(angle, k));
    prop_assert!(out.check_unit(1e-6));
    Ok(())
}

pub fn depth_metric_properties(seed: u64, n: usize) -> PropResult {
    let mut r = rng(seed);
    let gen = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| if r.random_bool(0.1) { f64::NAN } else { r.random_range(0.5..6.0) })
            .collect()
    };
    let (a, b) = (gen(&mut r), gen(&mut r));
    let pa = DepthImage::from_vec(n, 1, a.clone()).unwrap();
    let pb = DepthImage::from_vec(n, 1, b.clone()).unwrap();
    let Ok(m) = eval_depth(&pa, &pb, None) else {
        return Ok(());
    };
    for w in m.delta.windows(2) {
        prop_assert!(w[0] <= w[1]);
    }
    prop_assert!(m.rmse >= 0.0);
    let swapped = eval_depth(&pb, &pa, None).unwrap();
    prop_assert_eq!(swapped.delta, m.delta);
    prop_assert!((swapped.rmse - m.rmse).abs() < 1e-12);
    // permuting pixels changes nothing
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, r.random_range(0..=i));
    }
    let qa = DepthImage::from_vec(n, 1, idx.iter().map(|&i| a[i]).collect()).unwrap();
    let qb = DepthImage::from_vec(n, 1, idx.iter().map(|&i| b[i]).collect()).unwrap();
    let permuted = eval_depth(&qa, &qb, None).unwrap();
    prop_assert_eq!(permuted.delta, m.delta);
    prop_assert!((permuted.rmse - m.rmse).abs() < 1e-12);
    Ok(())
}

pub fn normal_metric_properties(errors: Vec<f64>) -> PropResult {
    let mut acc = NormalAccumulator::new();
    for &e in &errors {
        acc.push_error(e);
    }
    let m = acc.finish().unwrap();
    for w in m.below.windows(2) {
        prop_assert!(w[0] <= w[1]);
    }
    prop_assert!(m.below.iter().all(|b| (0.0..=100.0).contains(b)));
    prop_assert!(m.mad >= 0.0 && m.median >= 0.0 && m.rmse >= m.mad - 1e-9);
    Ok(())
}

/// Noisy tilted plane on a small image.
fn noisy_plane_scene(seed: u64) -> (CameraIntrinsics, Plane, DepthImage, NormalMap) {
    let k = k_tiny();
    let mut r = rng(seed);
    let mut n = super::random_unit(&mut r);
    n.z = -n.z.abs() - 0.5;
    let plane = Plane::new(n, r.random_range(1.0..4.0)).unwrap();
    let sigma = r.random_range(0.0..0.3);
    let noise = Normal::new(0.0, sigma).unwrap();
    let depth = DepthImage::from_fn(k.width, k.height, |p| {
        let z = plane.depth_along(k.bearing_at(p)).unwrap_or(f64::NAN);
        let noisy = z + noise.sample(&mut r);
        if noisy > 0.0 { noisy } else { f64::NAN }
    });
    let normals = NormalMap::from_fn(k.width, k.height, |_| jitter(&plane.normal, 25.0, &mut r));
    (k, plane, depth, normals)
}

pub fn region_growing_monotone(
    seed: u64,
    dist: f64,
    angle: f64,
    extra_dist: f64,
    extra_angle: f64,
) -> PropResult {
    let (k, plane, depth, normals) = noisy_plane_scene(seed);
    let seeds = [Pixel::new(20, 15), Pixel::new(3, 3), Pixel::new(35, 25)];
    let small = RefineConfig {
        grow_dist_m: dist,
        grow_angle_deg: angle,
        ..Default::default()
    };
    let large = RefineConfig {
        grow_dist_m: dist + extra_dist,
        grow_angle_deg: angle + extra_angle,
        ..Default::default()
    };
    let a = region_grow(&seeds, &plane, &depth, &normals, &k, &small).unwrap();
    let b = region_grow(&seeds, &plane, &depth, &normals, &k, &large).unwrap();
    let set: std::collections::HashSet<_> = b.iter().collect();
    prop_assert!(a.iter().all(|p| set.contains(p)));
    Ok(())
}

pub fn ransac_determinism_and_plane_invariants(seed: u64, rng_seed: u64) -> PropResult {
    let (k, _, depth, _) = noisy_plane_scene(seed);
    let mask: Vec<Pixel> = depth.iter_pixels().map(|(p, _)| p).collect();
    let cfg = RefineConfig {
        rng_seed,
        ransac_iters: 50,
        ..Default::default()
    };
    let (Ok(a), Ok(b)) = (
        fit_plane_ransac(&mask, &depth, &k, &cfg),
        fit_plane_ransac(&mask, &depth, &k, &cfg),
    ) else {
        return Ok(());
    };
    prop_assert_eq!(&a, &b);
    prop_assert!((a.plane.normal.norm() - 1.0).abs() < 1e-9);
    prop_assert!(a.plane.d > 0.0);
    Ok(())
}

pub fn distance_order_invariance(d: f64, n_in: usize, n_out: usize, seed: u64) -> PropResult {
    let mut r = rng(seed);
    let n = super::random_unit(&mut r);
    let mut d_values: Vec<f64> = (0..n_in).map(|_| d + r.random_range(-0.005..0.005)).collect();
    d_values.extend((0..n_out).map(|_| d * r.random_range(1.5..3.0)));
    let pts: Vec<Point3<f64>> = d_values.iter().map(|&di| Point3::from(-n * di)).collect();
    let cfg = EnrichConfig::default();
    let base = estimate_plane_distance(&n, &pts, &cfg).unwrap();
    let mut shuffled = pts.clone();
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, r.random_range(0..=i));
    }
    let again = estimate_plane_distance(&n, &shuffled, &cfg).unwrap();
    prop_assert!((base - again).abs() < 1e-12);
    prop_assert!((base - d).abs() < 0.005);
    Ok(())
}

pub fn normal_vote_is_unit(seed: u64, count: usize) -> PropResult {
    let mut r = rng(seed);
    let nm = NormalMap::from_fn(count, 1, |_| super::random_unit(&mut r));
    let px: Vec<Pixel> = (0..count).map(|u| Pixel::new(u, 0)).collect();
    let cfg = EnrichConfig {
        rng_seed: seed,
        ..Default::default()
    };
    let n = estimate_plane_normal(&px, &nm, &cfg).unwrap();
    prop_assert!((n.norm() - 1.0).abs() < 1e-12);
    Ok(())
}

pub fn enrichment_invariants(seed: u64, n_sparse: usize, sample_count: usize) -> PropResult {
    let k = k_tiny();
    let mut r = rng(seed);
    let inc = DepthImage::from_fn(k.width, k.height, |_| {
        if r.random_bool(0.5) { r.random_range(0.5..19.9) } else { f64::NAN }
    });
    let entries: std::collections::BTreeMap<(i64, i64), f64> = (0..n_sparse)
        .map(|_| ((r.random_range(0..40), r.random_range(0..30)), r.random_range(0.5..30.0)))
        .collect();
    let sparse = SparseDepth::new(40, 30, entries.iter().map(|(&(u, v), &z)| (u, v, z))).unwrap();
    let cfg = EnrichConfig {
        sample_count,
        rng_seed: seed,
        ..Default::default()
    };
    let inc = IncompleteDepth(inc);
    let out = sample_enriched(&sparse, &inc, &cfg);
    prop_assert!(out.len() <= sparse.len() + sample_count);
    for &(p, z) in sparse.entries() {
        prop_assert_eq!(out.get(p), Some(z));
    }
    for &(p, z) in out.entries() {
        if !sparse.contains(p) {
            prop_assert!(z > 0.0 && z < cfg.max_depth_m);
            prop_assert_eq!(inc.image().depth(p), Some(z));
        }
    }
    prop_assert_eq!(sample_enriched(&sparse, &inc, &cfg), out);
    Ok(())
}
