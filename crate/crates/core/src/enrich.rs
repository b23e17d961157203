//! Plane-based sparse depth enrichment.
//!
//! Each detected plane gets a normal by voting over per-pixel normals and a
//! distance by consensus over the sparse 3D points falling in its mask. The
//! planes are rasterized into an incomplete depth image, from which a random
//! subset is added to the sparse input.

use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::image::{is_valid_depth, DepthImage, NormalMap, Pixel, PlaneMaskSet, SparseDepth};
use crate::plane::Plane;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrichConfig {
    /// Number of pixels drawn as plane-normal hypotheses.
    pub normal_hypotheses: usize,
    /// Angular agreement for normal voting, degrees.
    pub normal_inlier_deg: f64,
    /// Distance-hypothesis agreement, meters.
    pub dist_inlier_m: f64,
    /// Minimum number of 3D points a plane needs to be used.
    pub min_dist_support: usize,
    /// Pixels sampled from the incomplete depth image.
    pub sample_count: usize,
    pub max_depth_m: f64,
    pub rng_seed: u64,
}

impl Default for EnrichConfig {
    fn default() -> Self {
        Self {
            normal_hypotheses: 16,
            normal_inlier_deg: 10.0,
            dist_inlier_m: 0.05,
            min_dist_support: 1,
            sample_count: 100,
            max_depth_m: crate::image::DEFAULT_MAX_DEPTH,
            rng_seed: 0,
        }
    }
}

impl EnrichConfig {
    pub fn validate(&self) -> Result<()> {
        if self.normal_hypotheses == 0 {
            return Err(Error::InvalidConfig("normal_hypotheses must be >= 1".into()));
        }
        if self.min_dist_support == 0 {
            return Err(Error::InvalidConfig("min_dist_support must be >= 1".into()));
        }
        for (name, v) in [
            ("normal_inlier_deg", self.normal_inlier_deg),
            ("dist_inlier_m", self.dist_inlier_m),
            ("max_depth_m", self.max_depth_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Depth synthesized over detected planes; every valid value lies in
/// `(0, max_depth_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteDepth(pub DepthImage);

impl IncompleteDepth {
    pub fn image(&self) -> &DepthImage {
        &self.0
    }
}

/// Votes for the dominant normal direction among the mask's valid normals and
/// returns the renormalized mean of the winning inlier set.
pub fn estimate_plane_normal(
    mask_pixels: &[Pixel],
    normals: &NormalMap,
    cfg: &EnrichConfig,
) -> Result<Vector3<f64>> {
    let candidates: Vec<Vector3<f64>> = mask_pixels
        .iter()
        .filter_map(|&p| normals.normal(p))
        .map(|n| n.normalize())
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoValidNormals);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let cos_thr = cfg.normal_inlier_deg.to_radians().cos();

    let mut best: Option<(usize, Vector3<f64>)> = None;
    for _ in 0..cfg.normal_hypotheses.max(1) {
        let hyp = candidates[rng.random_range(0..candidates.len())];
        let support = candidates.iter().filter(|n| n.dot(&hyp) > cos_thr).count();
        if best.is_none_or(|(s, _)| support > s) {
            best = Some((support, hyp));
        }
    }
    let (_, hyp) = best.expect("at least one hypothesis");
    let sum: Vector3<f64> = candidates.iter().filter(|n| n.dot(&hyp) > cos_thr).sum();
    let norm = sum.norm();
    if !(norm > 0.0) {
        return Err(Error::NoValidNormals);
    }
    Ok(sum / norm)
}

/// Consensus plane offset: every point proposes `d_i = -n·p_i`, and the mean
/// of the largest agreeing set wins (ties go to the lowest index).
pub fn estimate_plane_distance(
    normal: &Vector3<f64>,
    points: &[Point3<f64>],
    cfg: &EnrichConfig,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::NoSupport);
    }
    let hyps: Vec<f64> = points.iter().map(|p| -normal.dot(&p.coords)).collect();
    let mut best = (0usize, 0usize);
    for (i, &di) in hyps.iter().enumerate() {
        let support = hyps
            .iter()
            .filter(|&&dj| (dj - di).abs() < cfg.dist_inlier_m)
            .count();
        if support > best.0 {
            best = (support, i);
        }
    }
    let di = hyps[best.1];
    let (sum, count) = hyps
        .iter()
        .filter(|&&dj| (dj - di).abs() < cfg.dist_inlier_m)
        .fold((0.0, 0usize), |(s, c), &dj| (s + dj, c + 1));
    Ok(sum / count as f64)
}

/// 3D points of sparse entries that fall inside `mask_pixels`.
pub fn points_in_mask(
    sparse: &SparseDepth,
    mask_pixels: &[Pixel],
    k: &CameraIntrinsics,
) -> Vec<Point3<f64>> {
    mask_pixels
        .iter()
        .filter_map(|&px| sparse.get(px).map(|z| k.bearing_at(px).at_depth(z)))
        .collect()
}

/// Rasterizes planes over their masks with `z = -d / (n·b)`. Rays that miss
/// the plane or land outside `(0, max_depth_m)` stay invalid; where masks
/// overlap the nearer depth wins.
pub fn compute_incomplete_depth(
    planes: &[(Vec<Pixel>, Plane)],
    k: &CameraIntrinsics,
    cfg: &EnrichConfig,
) -> IncompleteDepth {
    let mut img = DepthImage::invalid(k.width, k.height);
    for (pixels, plane) in planes {
        for &px in pixels {
            if px.u >= k.width || px.v >= k.height {
                continue;
            }
            let Some(z) = plane.depth_along(k.bearing_at(px)) else {
                continue;
            };
            if !(z > 0.0 && z < cfg.max_depth_m) {
                continue;
            }
            let slot = &mut img.data_mut()[px.v * k.width + px.u];
            if !(slot.is_finite() && *slot <= z) {
                *slot = z;
            }
        }
    }
    IncompleteDepth(img)
}

/// Adds `min(sample_count, available)` incomplete-depth pixels, drawn
/// uniformly without replacement from those not already in `sparse`.
pub fn sample_enriched(
    sparse: &SparseDepth,
    incomplete: &IncompleteDepth,
    cfg: &EnrichConfig,
) -> SparseDepth {
    let img = incomplete.image();
    let available: Vec<(Pixel, f64)> = img
        .iter_pixels()
        .filter(|(p, z)| is_valid_depth(**z) && !sparse.contains(*p))
        .map(|(p, &z)| (p, z))
        .collect();
    let amount = cfg.sample_count.min(available.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut merged: BTreeMap<Pixel, f64> = sparse.entries().iter().copied().collect();
    for i in index::sample(&mut rng, available.len(), amount) {
        let (p, z) = available[i];
        merged.insert(p, z);
    }
    SparseDepth::from_sorted_map(sparse.width(), sparse.height(), merged)
}

/// Parameters estimated for one plane label.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneEstimate {
    pub label: u16,
    pub plane: Plane,
    /// Sparse points inside the mask.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichResult {
    pub planes: Vec<PlaneEstimate>,
    /// Labels skipped for lack of normals or point support.
    pub skipped: Vec<(u16, Error)>,
    pub incomplete: IncompleteDepth,
    pub enriched: SparseDepth,
}

/// Runs the whole enrichment for one frame. Plane `label` uses the seed
/// `cfg.rng_seed ^ label` for normal voting.
pub fn enrich_frame(
    sparse: &SparseDepth,
    masks: &PlaneMaskSet,
    normals: &NormalMap,
    k: &CameraIntrinsics,
    cfg: &EnrichConfig,
) -> Result<EnrichResult> {
    cfg.validate()?;
    masks.ensure_matches(k, "plane masks")?;
    normals.ensure_matches(k, "normals")?;
    if sparse.width() != k.width || sparse.height() != k.height {
        return Err(Error::DimensionMismatch("sparse depth vs camera".into()));
    }
    let mut planes = Vec::new();
    let mut skipped = Vec::new();
    let mut rasterize = Vec::new();
    for label in masks.labels() {
        let pixels = masks.pixels_of(label);
        let points = points_in_mask(sparse, &pixels, k);
        if points.len() < cfg.min_dist_support {
            skipped.push((label, Error::NoSupport));
            continue;
        }
        let plane_cfg = EnrichConfig {
            rng_seed: cfg.rng_seed ^ u64::from(label),
            ..cfg.clone()
        };
        let normal = match estimate_plane_normal(&pixels, normals, &plane_cfg) {
            Ok(n) => n,
            Err(e) => {
                skipped.push((label, e));
                continue;
            }
        };
        let d = estimate_plane_distance(&normal, &points, cfg)?;
        let plane = Plane { normal, d };
        planes.push(PlaneEstimate {
            label,
            plane,
            support: points.len(),
        });
        rasterize.push((pixels, plane));
    }
    let incomplete = compute_incomplete_depth(&rasterize, k, cfg);
    let enriched = sample_enriched(sparse, &incomplete, cfg);
    Ok(EnrichResult {
        planes,
        skipped,
        incomplete,
        enriched,
    })
}
