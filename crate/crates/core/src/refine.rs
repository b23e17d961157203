//! Plane annotation refinement: strict-threshold 3-point RANSAC followed by
//! region growing guided by point-to-plane distance and normal agreement.

use std::collections::VecDeque;

use nalgebra::Point3;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::image::{DepthImage, Mask, NormalMap, Pixel, PlaneMaskSet};
use crate::plane::Plane;

// Resampling budget per RANSAC iteration before a triple counts as degenerate.
const MAX_SAMPLE_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl Connectivity {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Self::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Self::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// RANSAC inlier threshold on point-to-plane distance, meters.
    pub ransac_inlier_m: f64,
    pub ransac_iters: usize,
    /// Region-growing point-to-plane distance bound, meters.
    pub grow_dist_m: f64,
    /// Region-growing normal agreement bound, degrees.
    pub grow_angle_deg: f64,
    /// Annotations whose grown region is smaller than this fraction of the
    /// annotated area are discarded.
    pub min_area_ratio: f64,
    pub connectivity: Connectivity,
    pub rng_seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            ransac_inlier_m: 0.02,
            ransac_iters: 500,
            grow_dist_m: 0.20,
            grow_angle_deg: 30.0,
            min_area_ratio: 0.5,
            connectivity: Connectivity::Four,
            rng_seed: 0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ransac_inlier_m", self.ransac_inlier_m),
            ("grow_dist_m", self.grow_dist_m),
            ("grow_angle_deg", self.grow_angle_deg),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.ransac_iters == 0 {
            return Err(Error::InvalidConfig("ransac_iters must be positive".into()));
        }
        if !(self.min_area_ratio > 0.0 && self.min_area_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "min_area_ratio must be in (0, 1], got {}",
                self.min_area_ratio
            )));
        }
        Ok(())
    }
}

/// Result of [`fit_plane_ransac`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    /// Winning consensus set, row-major.
    pub inliers: Vec<Pixel>,
}

fn valid_points(
    pixels: &[Pixel],
    depth: &DepthImage,
    k: &CameraIntrinsics,
) -> (Vec<Pixel>, Vec<Point3<f64>>) {
    pixels
        .iter()
        .filter_map(|&px| {
            let z = depth.depth(px)?;
            Some((px, k.bearing_at(px).at_depth(z)))
        })
        .unzip()
}

/// Fits a plane to the valid-depth pixels of `mask_pixels` with fixed-count
/// 3-point RANSAC, then refits by least squares over the best consensus set.
pub fn fit_plane_ransac(
    mask_pixels: &[Pixel],
    depth: &DepthImage,
    k: &CameraIntrinsics,
    cfg: &RefineConfig,
) -> Result<PlaneFit> {
    depth.ensure_matches(k, "depth")?;
    let (pixels, points) = valid_points(mask_pixels, depth, k);
    if points.len() < 3 {
        return Err(Error::InsufficientPoints {
            found: points.len(),
            required: 3,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let threshold = cfg.ransac_inlier_m;

    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..cfg.ransac_iters {
        let candidate = (0..MAX_SAMPLE_ATTEMPTS).find_map(|_| {
            let idx = index::sample(&mut rng, points.len(), 3);
            Plane::through(&points[idx.index(0)], &points[idx.index(1)], &points[idx.index(2)])
        });
        let Some(plane) = candidate else {
            continue;
        };
        let support = points
            .iter()
            .filter(|p| plane.signed_distance(p).abs() < threshold)
            .count();
        if best.is_none_or(|(s, _)| support > s) {
            best = Some((support, plane));
        }
    }
    let (_, hypothesis) = best.ok_or(Error::DegenerateSample)?;

    let (inliers, inlier_points): (Vec<Pixel>, Vec<Point3<f64>>) = pixels
        .iter()
        .zip(&points)
        .filter(|(_, p)| hypothesis.signed_distance(p).abs() < threshold)
        .map(|(px, p)| (*px, *p))
        .unzip();

    let centroid = Point3::from(
        inlier_points
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords)
            / inlier_points.len() as f64,
    );
    let plane = Plane::fit_least_squares(&inlier_points)
        .unwrap_or(hypothesis)
        .facing_camera(&centroid);
    Ok(PlaneFit { plane, inliers })
}

/// Pixel-level growth test shared by [`region_grow`] and its post-checks.
#[derive(Debug, Clone, Copy)]
pub struct GrowthCriteria {
    pub plane: Plane,
    pub max_dist: f64,
    cos_max_angle: f64,
}

impl GrowthCriteria {
    pub fn new(plane: Plane, max_dist: f64, max_angle_deg: f64) -> Self {
        Self {
            plane,
            max_dist,
            cos_max_angle: max_angle_deg.to_radians().cos(),
        }
    }

    /// True iff the pixel's 3D point lies within `max_dist` of the plane and
    /// its normal is within the angle bound of the plane normal.
    pub fn admits(
        &self,
        px: Pixel,
        depth: &DepthImage,
        normals: &NormalMap,
        k: &CameraIntrinsics,
    ) -> bool {
        let Some(z) = depth.depth(px) else {
            return false;
        };
        let Some(n) = normals.normal(px) else {
            return false;
        };
        let p = k.bearing_at(px).at_depth(z);
        if !(self.plane.signed_distance(&p).abs() < self.max_dist) {
            return false;
        }
        let cos = n.dot(&self.plane.normal) / n.norm();
        cos > self.cos_max_angle
    }
}

/// Breadth-first growth from `seeds`. A pixel (seeds included) joins when it
/// passes [`GrowthCriteria::admits`]. Returns the grown set row-major.
pub fn region_grow(
    seeds: &[Pixel],
    plane: &Plane,
    depth: &DepthImage,
    normals: &NormalMap,
    k: &CameraIntrinsics,
    cfg: &RefineConfig,
) -> Result<Vec<Pixel>> {
    depth.ensure_matches(k, "depth")?;
    normals.ensure_matches(k, "normals")?;
    let criteria = GrowthCriteria::new(*plane, cfg.grow_dist_m, cfg.grow_angle_deg);
    let (w, h) = (depth.width(), depth.height());

    // 0 = unvisited, 1 = rejected, 2 = accepted
    let mut state = vec![0u8; w * h];
    let mut queue = VecDeque::new();
    for &s in seeds {
        let i = s.v * w + s.u;
        if s.u >= w || s.v >= h || state[i] != 0 {
            continue;
        }
        if criteria.admits(s, depth, normals, k) {
            state[i] = 2;
            queue.push_back(s);
        } else {
            state[i] = 1;
        }
    }
    while let Some(px) = queue.pop_front() {
        for &(du, dv) in cfg.connectivity.offsets() {
            let (u, v) = (px.u as i64 + du, px.v as i64 + dv);
            if u < 0 || v < 0 || u as usize >= w || v as usize >= h {
                continue;
            }
            let q = Pixel::new(u as usize, v as usize);
            let i = q.v * w + q.u;
            if state[i] != 0 {
                continue;
            }
            if criteria.admits(q, depth, normals, k) {
                state[i] = 2;
                queue.push_back(q);
            } else {
                state[i] = 1;
            }
        }
    }
    Ok(state
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == 2)
        .map(|(i, _)| Pixel::new(i % w, i / w))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscardReason {
    InsufficientPoints { found: usize },
    DegenerateSample,
    TooSmall { grown: usize, annotated: usize },
}

impl std::fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::InsufficientPoints { found } => {
                write!(f, "only {found} pixels with valid depth")
            }
            Self::DegenerateSample => write!(f, "no non-degenerate point triple"),
            Self::TooSmall { grown, annotated } => {
                write!(f, "grown region {grown} px vs annotation {annotated} px")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefineOutcome {
    Refined { plane: Plane, pixels: Vec<Pixel> },
    Discard(DiscardReason),
}

impl RefineOutcome {
    pub fn pixels(&self) -> Option<&[Pixel]> {
        match self {
            Self::Refined { pixels, .. } => Some(pixels),
            Self::Discard(_) => None,
        }
    }

    pub fn is_discard(&self) -> bool {
        matches!(self, Self::Discard(_))
    }
}

/// Refines one annotated plane instance. The grown region is not clipped to
/// the annotation. RANSAC is seeded with `cfg.rng_seed ^ label`.
pub fn refine_annotation(
    label: u16,
    masks: &PlaneMaskSet,
    depth: &DepthImage,
    normals: &NormalMap,
    k: &CameraIntrinsics,
    cfg: &RefineConfig,
) -> Result<RefineOutcome> {
    cfg.validate()?;
    masks.ensure_matches(k, "plane masks")?;
    if label == 0 {
        return Err(Error::UnknownLabel(label));
    }
    let annotated = masks.pixels_of(label);
    if annotated.is_empty() {
        return Err(Error::UnknownLabel(label));
    }
    let seeded = RefineConfig {
        rng_seed: cfg.rng_seed ^ u64::from(label),
        ..cfg.clone()
    };
    let fit = match fit_plane_ransac(&annotated, depth, k, &seeded) {
        Ok(fit) => fit,
        Err(Error::InsufficientPoints { found, .. }) => {
            return Ok(RefineOutcome::Discard(DiscardReason::InsufficientPoints { found }))
        }
        Err(Error::DegenerateSample) => {
            return Ok(RefineOutcome::Discard(DiscardReason::DegenerateSample))
        }
        Err(e) => return Err(e),
    };
    let grown = region_grow(&fit.inliers, &fit.plane, depth, normals, k, cfg)?;
    if (grown.len() as f64) < cfg.min_area_ratio * annotated.len() as f64 {
        return Ok(RefineOutcome::Discard(DiscardReason::TooSmall {
            grown: grown.len(),
            annotated: annotated.len(),
        }));
    }
    Ok(RefineOutcome::Refined {
        plane: fit.plane,
        pixels: grown,
    })
}

/// Refinement of a whole mask set.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedMasks {
    /// Refined labels, renumbered densely `1..=K`.
    pub masks: PlaneMaskSet,
    /// Plane of refined label `i + 1`.
    pub planes: Vec<Plane>,
    /// Original labels that were dropped, with the reason.
    pub discarded: Vec<(u16, DiscardReason)>,
}

/// Refines every annotation in ascending label order. Where grown regions
/// overlap, the pixel stays with the lower original label; an annotation left
/// with no pixels of its own is dropped as too small.
pub fn refine_all(
    masks: &PlaneMaskSet,
    depth: &DepthImage,
    normals: &NormalMap,
    k: &CameraIntrinsics,
    cfg: &RefineConfig,
) -> Result<RefinedMasks> {
    let (w, h) = (masks.width(), masks.height());
    let mut claimed = Mask::filled(w, h, false);
    let mut out = PlaneMaskSet::filled(w, h, 0);
    let mut planes = Vec::new();
    let mut discarded = Vec::new();
    for label in masks.labels() {
        match refine_annotation(label, masks, depth, normals, k, cfg)? {
            RefineOutcome::Discard(reason) => discarded.push((label, reason)),
            RefineOutcome::Refined { plane, pixels } => {
                let free: Vec<Pixel> = pixels.into_iter().filter(|p| !*claimed.get(*p)).collect();
                if free.is_empty() {
                    discarded.push((
                        label,
                        DiscardReason::TooSmall {
                            grown: 0,
                            annotated: masks.pixels_of(label).len(),
                        },
                    ));
                    continue;
                }
                planes.push(plane);
                let new_label = planes.len() as u16;
                for p in free {
                    claimed.set(p, true);
                    out.set(p, new_label);
                }
            }
        }
    }
    Ok(RefinedMasks {
        masks: out,
        planes,
        discarded,
    })
}
