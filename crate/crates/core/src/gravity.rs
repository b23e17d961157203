//! Gravity estimation and roll alignment.
//!
//! A roll warp rotates the camera about its optical axis so that the
//! projection of gravity points straight down the image (+Y). Rotations about
//! the optical axis leave every point's Z untouched, so depth values survive
//! the warp unchanged.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::image::{is_valid_normal, Image, Mask, NormalMap, Pixel, SparseDepth};

/// Minimum norm of the in-image-plane gravity component for a defined roll.
pub const DEGENERATE_GRAVITY_NORM: f64 = 0.05;

/// Default minimum number of floor normals for [`gravity_from_floor`].
pub const DEFAULT_MIN_FLOOR_PIXELS: usize = 50;

// Sample coordinates this close to an integer are treated as exact pixel hits.
const SNAP_EPS: f64 = 1e-9;

/// Unit gravity direction in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityVector(Vector3<f64>);

impl GravityVector {
    /// Normalizes `v`; fails on zero or non-finite input.
    pub fn new(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidConfig(format!("gravity vector {v:?} has no direction")));
        }
        Ok(Self(v / n))
    }

    #[inline]
    pub fn as_vector(&self) -> Vector3<f64> {
        self.0
    }

    /// Gravity seen by an upright camera.
    pub fn upright() -> Self {
        Self(Vector3::new(0.0, 1.0, 0.0))
    }
}

/// Rotation about the optical (Z) axis.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Estimates gravity as the negated mean of floor normals (which point up,
/// toward the camera).
pub fn gravity_from_floor(
    normals: &NormalMap,
    floor_mask: &Mask,
    min_pixels: usize,
) -> Result<GravityVector> {
    normals.ensure_same_shape(floor_mask, "normals vs floor mask")?;
    let mut sum = Vector3::zeros();
    let mut count = 0usize;
    for (n, &floor) in normals.data().iter().zip(floor_mask.data()) {
        if floor && is_valid_normal(n) {
            sum += n;
            count += 1;
        }
    }
    if count < min_pixels.max(1) {
        return Err(Error::InsufficientFloor {
            found: count,
            required: min_pixels.max(1),
        });
    }
    GravityVector::new(-sum)
}

/// Roll angle `atan2(gx, gy)`; `rot_z(angle) * g` has zero x and positive y.
pub fn roll_angle(g: &GravityVector) -> Result<f64> {
    let g = g.as_vector();
    let norm = g.x.hypot(g.y);
    if norm < DEGENERATE_GRAVITY_NORM {
        return Err(Error::DegenerateGravity { norm });
    }
    Ok(g.x.atan2(g.y))
}

/// Pixel homographies of a roll alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RollWarp {
    angle: f64,
    k: CameraIntrinsics,
    /// Warped pixel -> source pixel, `K Rz(angle)^T K^-1`.
    to_source: Matrix3<f64>,
    /// Source pixel -> warped pixel, `K Rz(angle) K^-1`.
    to_warped: Matrix3<f64>,
}

impl RollWarp {
    pub fn from_angle(angle: f64, k: CameraIntrinsics) -> Self {
        let r = rot_z(angle);
        let (km, kinv) = (k.matrix(), k.inverse_matrix());
        Self {
            angle,
            k,
            to_source: km * r.transpose() * kinv,
            to_warped: km * r * kinv,
        }
    }

    pub fn identity(k: CameraIntrinsics) -> Self {
        Self::from_angle(0.0, k)
    }

    pub fn inverse(&self) -> Self {
        Self::from_angle(-self.angle, self.k)
    }

    #[inline]
    pub fn angle(&self) -> f64 {
        self.angle
    }

    #[inline]
    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.k
    }

    /// Camera rotation taking source-frame vectors into the warped frame.
    pub fn rotation(&self) -> Matrix3<f64> {
        rot_z(self.angle)
    }

    pub fn forward_matrix(&self) -> &Matrix3<f64> {
        &self.to_source
    }

    pub fn inverse_matrix(&self) -> &Matrix3<f64> {
        &self.to_warped
    }

    /// Source-image position sampled by warped pixel `(u, v)`.
    #[inline]
    pub fn forward(&self, u: f64, v: f64) -> (f64, f64) {
        apply_homography(&self.to_source, u, v)
    }

    /// Warped-image position of source pixel `(u, v)`.
    #[inline]
    pub fn inverse_map(&self, u: f64, v: f64) -> (f64, f64) {
        apply_homography(&self.to_warped, u, v)
    }
}

#[inline]
fn apply_homography(h: &Matrix3<f64>, u: f64, v: f64) -> (f64, f64) {
    let p = h * Vector3::new(u, v, 1.0);
    (p.x / p.z, p.y / p.z)
}

/// Builds the warp that aligns projected gravity with the image down axis.
pub fn build_roll_warp(g: &GravityVector, k: &CameraIntrinsics) -> Result<RollWarp> {
    Ok(RollWarp::from_angle(roll_angle(g)?, *k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Nearest,
    Bilinear,
}

/// Pixel values that can be resampled by a warp.
pub trait Resample: Copy {
    fn invalid() -> Self;
    fn is_valid(&self) -> bool;
    /// Weighted combination of valid samples whose weights sum to one.
    fn blend(samples: &[(Self, f64)]) -> Self;
}

impl Resample for f64 {
    fn invalid() -> Self {
        f64::NAN
    }
    fn is_valid(&self) -> bool {
        self.is_finite()
    }
    fn blend(samples: &[(Self, f64)]) -> Self {
        samples.iter().map(|(x, w)| x * w).sum()
    }
}

impl Resample for [f64; 3] {
    fn invalid() -> Self {
        [f64::NAN; 3]
    }
    fn is_valid(&self) -> bool {
        self.iter().all(|c| c.is_finite())
    }
    fn blend(samples: &[(Self, f64)]) -> Self {
        let mut out = [0.0; 3];
        for (x, w) in samples {
            for c in 0..3 {
                out[c] += x[c] * w;
            }
        }
        out
    }
}

impl Resample for Vector3<f64> {
    fn invalid() -> Self {
        Vector3::zeros()
    }
    fn is_valid(&self) -> bool {
        is_valid_normal(self)
    }
    fn blend(samples: &[(Self, f64)]) -> Self {
        if samples.len() == 1 {
            return samples[0].0;
        }
        let sum: Vector3<f64> = samples.iter().map(|(n, w)| n * *w).sum();
        let norm = sum.norm();
        if norm < 1e-6 {
            Vector3::zeros()
        } else {
            sum / norm
        }
    }
}

fn dominant<T: Copy>(samples: &[(T, f64)]) -> T {
    samples
        .iter()
        .fold(None::<(T, f64)>, |best, &(x, w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((x, w)),
        })
        .map(|(x, _)| x)
        .expect("at least one sample")
}

impl Resample for u16 {
    fn invalid() -> Self {
        0
    }
    fn is_valid(&self) -> bool {
        true
    }
    fn blend(samples: &[(Self, f64)]) -> Self {
        dominant(samples)
    }
}

impl Resample for bool {
    fn invalid() -> Self {
        false
    }
    fn is_valid(&self) -> bool {
        true
    }
    fn blend(samples: &[(Self, f64)]) -> Self {
        dominant(samples)
    }
}

#[inline]
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP_EPS {
        r
    } else {
        x
    }
}

/// Samples `img` at continuous coordinates; out-of-image samples are invalid.
pub fn sample<T: Resample>(img: &Image<T>, x: f64, y: f64, interp: Interpolation) -> T {
    let (x, y) = (snap(x), snap(y));
    match interp {
        Interpolation::Nearest => {
            let (u, v) = ((x + 0.5).floor() as i64, (y + 0.5).floor() as i64);
            img.at(u, v).copied().unwrap_or_else(T::invalid)
        }
        Interpolation::Bilinear => {
            if !(x >= 0.0 && y >= 0.0)
                || x > (img.width() - 1) as f64
                || y > (img.height() - 1) as f64
            {
                return T::invalid();
            }
            let (x0, y0) = (x.floor(), y.floor());
            let (ax, ay) = (x - x0, y - y0);
            let (x0, y0) = (x0 as usize, y0 as usize);
            let mut samples = [(T::invalid(), 0.0); 4];
            let mut n = 0;
            for (dx, wx) in [(0, 1.0 - ax), (1, ax)] {
                for (dy, wy) in [(0, 1.0 - ay), (1, ay)] {
                    let w = wx * wy;
                    if w == 0.0 {
                        continue;
                    }
                    let value = *img.get(Pixel::new(x0 + dx, y0 + dy));
                    if !value.is_valid() {
                        return T::invalid();
                    }
                    samples[n] = (value, w);
                    n += 1;
                }
            }
            T::blend(&samples[..n])
        }
    }
}

/// Resamples an image into the warped frame.
pub fn warp_image<T: Resample>(img: &Image<T>, warp: &RollWarp, interp: Interpolation) -> Image<T> {
    Image::from_fn(img.width(), img.height(), |p| {
        let (x, y) = warp.forward(p.u as f64, p.v as f64);
        sample(img, x, y, interp)
    })
}

/// Resamples a normal map and rotates each normal into the warped frame.
pub fn warp_normals(nm: &NormalMap, warp: &RollWarp) -> NormalMap {
    let r = warp.rotation();
    let mut out = warp_image(nm, warp, Interpolation::Bilinear);
    for n in out.data_mut() {
        if is_valid_normal(n) {
            *n = r * *n;
        }
    }
    out
}

/// Moves sparse entries into the warped frame. Depths are unchanged; entries
/// landing off-frame are dropped and collisions keep the nearer depth.
pub fn warp_sparse_depth(sd: &SparseDepth, warp: &RollWarp) -> SparseDepth {
    let mut best: BTreeMap<Pixel, f64> = BTreeMap::new();
    for &(p, z) in sd.entries() {
        let (x, y) = warp.inverse_map(p.u as f64, p.v as f64);
        let (x, y) = (snap(x), snap(y));
        let (u, v) = ((x + 0.5).floor() as i64, (y + 0.5).floor() as i64);
        if u < 0 || v < 0 || u as usize >= sd.width() || v as usize >= sd.height() {
            continue;
        }
        best.entry(Pixel::new(u as usize, v as usize))
            .and_modify(|old| {
                if z < *old {
                    *old = z
                }
            })
            .or_insert(z);
    }
    SparseDepth::from_sorted_map(sd.width(), sd.height(), best)
}
