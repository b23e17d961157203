//! Analytic planar-room renderer and a noise model for SLAM-like sparse depth.
//!
//! World frame is Z-up. With zero yaw, pitch and roll the camera looks along
//! world +X with its image right axis on world -Y and image down on world -Z.

use nalgebra::{Matrix3, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::gravity::GravityVector;
use crate::image::{
    is_valid_depth, is_valid_normal, DepthImage, Image, NormalMap, Pixel, PlaneMaskSet, SparseDepth,
    DEFAULT_MAX_DEPTH,
};
use crate::plane::Plane;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    /// World position, meters.
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub pitch_deg: f64,
    #[serde(default)]
    pub roll_deg: f64,
}

impl CameraPose {
    /// Camera-to-world rotation; columns are the camera axes in world frame.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sy, cy) = self.yaw_deg.to_radians().sin_cos();
        let base = Matrix3::new(sy, 0.0, cy, -cy, 0.0, sy, 0.0, -1.0, 0.0);
        let (sp, cp) = self.pitch_deg.to_radians().sin_cos();
        let pitch = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
        base * pitch * crate::gravity::rot_z(self.roll_deg.to_radians())
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    /// Random nearby pose: position within +-0.5 m (kept 0.3 m inside the
    /// room), yaw +-45, pitch +-10 and roll +-20 degrees.
    pub fn jittered(&self, room: [f64; 3], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut position = self.position;
        for (i, c) in position.iter_mut().enumerate() {
            let lo = 0.3f64.min(room[i] / 2.0);
            *c = (*c + rng.random_range(-0.5..=0.5)).clamp(lo, room[i] - lo);
        }
        Self {
            position,
            yaw_deg: self.yaw_deg + rng.random_range(-45.0..=45.0),
            pitch_deg: self.pitch_deg + rng.random_range(-10.0..=10.0),
            roll_deg: self.roll_deg + rng.random_range(-20.0..=20.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// Axis-aligned box, world frame.
    Slab { min: [f64; 3], max: [f64; 3] },
    /// Unbounded plane `normal·X + d = 0`, world frame.
    Plane { normal: [f64; 3], d: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Room spans `[0, room[i]]` along each world axis.
    pub room: [f64; 3],
    pub camera: CameraPose,
    pub intrinsics: CameraIntrinsics,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
    #[serde(default = "default_max_depth")]
    pub max_depth_m: f64,
}

fn default_max_depth() -> f64 {
    DEFAULT_MAX_DEPTH
}

impl SceneConfig {
    /// 4 x 5 x 3 m room with an upright camera at its center facing +X.
    pub fn default_room(intrinsics: CameraIntrinsics) -> Self {
        Self {
            room: [4.0, 5.0, 3.0],
            camera: CameraPose {
                position: [2.0, 2.5, 1.5],
                yaw_deg: 0.0,
                pitch_deg: 0.0,
                roll_deg: 0.0,
            },
            intrinsics,
            primitives: Vec::new(),
            max_depth_m: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if !self.room.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidConfig("room extents must be positive".into()));
        }
        let c = self.camera.position;
        if !(0..3).all(|i| c[i] > 0.0 && c[i] < self.room[i]) {
            return Err(Error::InvalidConfig(format!(
                "camera {c:?} is not strictly inside the room {:?}",
                self.room
            )));
        }
        let angles = [self.camera.yaw_deg, self.camera.pitch_deg, self.camera.roll_deg];
        if !angles.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidConfig("camera angles must be finite".into()));
        }
        if !(self.max_depth_m > 0.0) {
            return Err(Error::InvalidConfig("max_depth_m must be positive".into()));
        }
        for prim in &self.primitives {
            match prim {
                Primitive::Slab { min, max } => {
                    if !(0..3).all(|i| min[i] < max[i]) {
                        return Err(Error::InvalidConfig(format!(
                            "slab min {min:?} must be below max {max:?}"
                        )));
                    }
                    if (0..3).all(|i| c[i] >= min[i] && c[i] <= max[i]) {
                        return Err(Error::InvalidConfig("camera inside a slab".into()));
                    }
                }
                Primitive::Plane { normal, d } => {
                    if Vector3::from(*normal).norm() == 0.0 || !d.is_finite() {
                        return Err(Error::InvalidConfig("degenerate primitive plane".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Surface {
    /// Camera-frame plane facing the camera.
    plane: Plane,
    /// For box faces: axis of the face and the world box bounds.
    bounds: Option<(usize, [f64; 3], [f64; 3])>,
}

/// World-frame plane `n·X + w = 0` expressed in the camera frame, oriented
/// toward the camera.
fn to_camera(n_world: Vector3<f64>, w: f64, r_wc: &Matrix3<f64>, t: &Vector3<f64>) -> Plane {
    let norm = n_world.norm();
    let (n_world, w) = (n_world / norm, w / norm);
    let n = r_wc.transpose() * n_world;
    let d = n_world.dot(t) + w;
    if d < 0.0 {
        Plane { normal: -n, d: -d }
    } else {
        Plane { normal: n, d }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub depth: DepthImage,
    pub normals: NormalMap,
    /// Dense labels `1..=K` over visible surfaces.
    pub masks: PlaneMaskSet,
    pub gravity: GravityVector,
    /// Camera-frame plane of label `i + 1`.
    pub planes: Vec<Plane>,
    /// Label of the room floor, if visible.
    pub floor_label: Option<u16>,
}

/// Ray-casts every pixel against the room and primitives.
pub fn render_scene(cfg: &SceneConfig) -> Result<RenderedScene> {
    cfg.validate()?;
    let k = cfg.intrinsics;
    let r_wc = cfg.camera.rotation();
    let t = cfg.camera.translation();

    let mut surfaces = Vec::new();
    for axis in [2, 0, 1] {
        for (value, sign) in [(0.0, 1.0), (cfg.room[axis], -1.0)] {
            let mut n = Vector3::zeros();
            n[axis] = sign;
            surfaces.push(Surface {
                plane: to_camera(n, -sign * value, &r_wc, &t),
                bounds: None,
            });
        }
    }
    // surfaces[0] is the floor (z = 0)
    for prim in &cfg.primitives {
        match prim {
            Primitive::Slab { min, max } => {
                for axis in 0..3 {
                    for value in [min[axis], max[axis]] {
                        let mut n = Vector3::zeros();
                        n[axis] = 1.0;
                        surfaces.push(Surface {
                            plane: to_camera(n, -value, &r_wc, &t),
                            bounds: Some((axis, *min, *max)),
                        });
                    }
                }
            }
            Primitive::Plane { normal, d } => surfaces.push(Surface {
                plane: to_camera(Vector3::from(*normal), *d, &r_wc, &t),
                bounds: None,
            }),
        }
    }

    let (w, h) = (k.width, k.height);
    let mut depth = DepthImage::invalid(w, h);
    let mut normals = NormalMap::invalid_normals(w, h);
    let mut raw_labels = Image::<u32>::filled(w, h, 0);
    for v in 0..h {
        for u in 0..w {
            let px = Pixel::new(u, v);
            let b = k.bearing_at(px);
            let mut best: Option<(f64, usize)> = None;
            for (i, s) in surfaces.iter().enumerate() {
                let Some(z) = s.plane.depth_along(b) else {
                    continue;
                };
                if !(z > 0.0) || best.is_some_and(|(bz, _)| bz <= z) {
                    continue;
                }
                if let Some((axis, lo, hi)) = s.bounds {
                    let xw = r_wc * b.to_vector() * z + t;
                    let inside = (0..3)
                        .filter(|&a| a != axis)
                        .all(|a| xw[a] >= lo[a] && xw[a] <= hi[a]);
                    if !inside {
                        continue;
                    }
                }
                best = Some((z, i));
            }
            if let Some((z, i)) = best {
                if z < cfg.max_depth_m {
                    depth.set(px, z);
                    normals.set(px, surfaces[i].plane.normal);
                    raw_labels.set(px, i as u32 + 1);
                }
            }
        }
    }

    let mut used: Vec<u32> = raw_labels.data().iter().copied().filter(|&l| l > 0).collect();
    used.sort_unstable();
    used.dedup();
    if used.len() > u16::MAX as usize {
        return Err(Error::InvalidConfig("too many visible surfaces".into()));
    }
    let masks = raw_labels.map(|&l| {
        if l == 0 {
            0
        } else {
            used.binary_search(&l).map(|i| i as u16 + 1).unwrap_or(0)
        }
    });
    let planes = used.iter().map(|&l| surfaces[l as usize - 1].plane).collect();
    let floor_label = used.binary_search(&1).ok().map(|i| i as u16 + 1);
    let gravity = GravityVector::new(r_wc.transpose() * Vector3::new(0.0, 0.0, -1.0))?;
    Ok(RenderedScene {
        depth,
        normals,
        masks,
        gravity,
        planes,
        floor_label,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparseSimConfig {
    pub point_count: usize,
    /// 0 samples pixels uniformly, 1 samples proportionally to texture gradient.
    pub cluster_bias: f64,
    /// Gaussian depth noise, meters.
    pub depth_noise_sigma: f64,
    pub outlier_fraction: f64,
    /// Outlier depths are scaled by `Uniform(1, outlier_scale)`.
    pub outlier_scale: f64,
    pub rng_seed: u64,
}

impl Default for SparseSimConfig {
    fn default() -> Self {
        Self {
            point_count: 200,
            cluster_bias: 0.7,
            depth_noise_sigma: 0.0,
            outlier_fraction: 0.0,
            outlier_scale: 1.5,
            rng_seed: 0,
        }
    }
}

impl SparseSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cluster_bias) {
            return Err(Error::InvalidConfig("cluster_bias must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidConfig("outlier_fraction must be in [0, 1]".into()));
        }
        if !(self.depth_noise_sigma >= 0.0) || !self.depth_noise_sigma.is_finite() {
            return Err(Error::InvalidConfig("depth_noise_sigma must be >= 0".into()));
        }
        if !(self.outlier_scale >= 1.0) || !self.outlier_scale.is_finite() {
            return Err(Error::InvalidConfig("outlier_scale must be >= 1".into()));
        }
        Ok(())
    }
}

/// Smooth background with a few high-frequency checker patches, a stand-in
/// for textured regions where feature trackers find points.
pub fn procedural_texture(width: usize, height: usize, seed: u64) -> Image<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = (width.min(height) as f64 / 10.0).max(2.0);
    let patches: Vec<(f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(radius..(width as f64 - radius).max(radius + 1.0)),
                rng.random_range(radius..(height as f64 - radius).max(radius + 1.0)),
            )
        })
        .collect();
    Image::from_fn(width, height, |p| {
        let (x, y) = (p.u as f64, p.v as f64);
        let mut value: f64 = 0.5;
        for &(cx, cy) in &patches {
            let (dx, dy) = (x - cx, y - cy);
            if dx.abs() <= radius && dy.abs() <= radius {
                let checker = if ((p.u / 3) + (p.v / 3)) % 2 == 0 { 0.4 } else { -0.4 };
                value += checker;
            }
        }
        value.clamp(0.0, 1.0)
    })
}

/// Central-difference gradient magnitude scaled to `[0, 1]`.
pub fn gradient_magnitude(img: &Image<f64>) -> Image<f64> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let at = |u: i64, v: i64| *img.get(Pixel::new(u.clamp(0, w - 1) as usize, v.clamp(0, h - 1) as usize));
    let g = Image::from_fn(img.width(), img.height(), |p| {
        let (u, v) = (p.u as i64, p.v as i64);
        let gx = 0.5 * (at(u + 1, v) - at(u - 1, v));
        let gy = 0.5 * (at(u, v + 1) - at(u, v - 1));
        let m = gx.hypot(gy);
        if m.is_finite() {
            m
        } else {
            0.0
        }
    });
    let max = g.data().iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        g.map(|m| m / max)
    } else {
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSimulation {
    pub sparse: SparseDepth,
    /// Pixels whose depth was replaced by an outlier, row-major.
    pub outliers: Vec<Pixel>,
}

/// Samples SLAM-like sparse depth from ground truth. Pixels are drawn without
/// replacement with weight `(1 - bias) + bias * gradient`; depths get Gaussian
/// noise, then exactly `round(outlier_fraction * n)` of them are scaled by
/// `Uniform(1, outlier_scale)`.
pub fn simulate_sparse(
    gt: &DepthImage,
    texture: Option<&Image<f64>>,
    cfg: &SparseSimConfig,
) -> Result<SparseSimulation> {
    cfg.validate()?;
    let generated;
    let texture = match texture {
        Some(t) => {
            gt.ensure_same_shape(t, "ground truth vs texture")?;
            t
        }
        None => {
            generated = procedural_texture(gt.width(), gt.height(), cfg.rng_seed);
            &generated
        }
    };
    let grad = gradient_magnitude(texture);
    let candidates: Vec<(usize, f64)> = gt
        .data()
        .iter()
        .zip(grad.data())
        .enumerate()
        .filter(|(_, (z, _))| is_valid_depth(**z))
        .map(|(i, (_, g))| (i, (1.0 - cfg.cluster_bias) + cfg.cluster_bias * g))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let amount = cfg.point_count.min(candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let picked = if cfg.cluster_bias == 0.0 {
        index::sample(&mut rng, candidates.len(), amount)
    } else {
        index::sample_weighted(&mut rng, candidates.len(), |i| candidates[i].1, amount)
            .map_err(|e| Error::InvalidConfig(format!("weighted sampling failed: {e}")))?
    };

    let noise = Normal::new(0.0, cfg.depth_noise_sigma)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut samples: Vec<(Pixel, f64)> = picked
        .iter()
        .map(|i| {
            let idx = candidates[i].0;
            let z = gt.data()[idx];
            let mut noisy = z + noise.sample(&mut rng);
            if !(noisy > 0.0) {
                noisy = z;
            }
            (gt.pixel_of(idx), noisy)
        })
        .collect();

    let n_out = (cfg.outlier_fraction * samples.len() as f64).round() as usize;
    let scale = Uniform::new_inclusive(1.0, cfg.outlier_scale)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut outliers = Vec::with_capacity(n_out);
    for i in index::sample(&mut rng, samples.len(), n_out) {
        samples[i].1 *= scale.sample(&mut rng);
        outliers.push(samples[i].0);
    }
    outliers.sort();
    let sparse = SparseDepth::new(
        gt.width(),
        gt.height(),
        samples.iter().map(|(p, z)| (p.u as i64, p.v as i64, *z)),
    )?;
    Ok(SparseSimulation { sparse, outliers })
}

/// Emulates a misaligned instance annotation: the label's region is shifted by
/// `shift = (du, dv)` pixels and dilated by `dilate` pixels (8-neighborhood).
/// The outermost dilation ring is kept per pixel with probability 1/2.
pub fn perturb_annotation(
    masks: &PlaneMaskSet,
    label: u16,
    shift: (i64, i64),
    dilate: usize,
    seed: u64,
) -> Result<PlaneMaskSet> {
    let region = masks.pixels_of(label);
    if label == 0 || region.is_empty() {
        return Err(Error::UnknownLabel(label));
    }
    let (w, h) = (masks.width(), masks.height());
    let mut current = Image::<bool>::filled(w, h, false);
    for p in region {
        let (u, v) = (p.u as i64 + shift.0, p.v as i64 + shift.1);
        if current.contains(u, v) {
            current.set(Pixel::new(u as usize, v as usize), true);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for step in 0..dilate {
        let last = step + 1 == dilate;
        let mut next = current.clone();
        for (p, _) in current.iter_pixels().filter(|(_, &b)| !b) {
            let touches = (-1i64..=1).any(|dv| {
                (-1i64..=1).any(|du| {
                    current
                        .at(p.u as i64 + du, p.v as i64 + dv)
                        .copied()
                        .unwrap_or(false)
                })
            });
            if touches && (!last || rng.random_bool(0.5)) {
                next.set(p, true);
            }
        }
        current = next;
    }
    let mut out = masks.map(|&l| if l == label { 0 } else { l });
    for (p, _) in current.iter_pixels().filter(|(_, &b)| b) {
        out.set(p, label);
    }
    Ok(out)
}


/// Perturbs each valid normal by a random tilt with per-axis standard
/// deviation `sigma_deg`. Invalid normals stay invalid.
pub fn perturb_normals(normals: &NormalMap, sigma_deg: f64, seed: u64) -> Result<NormalMap> {
    let tilt = Normal::new(0.0, sigma_deg.to_radians())
        .map_err(|e| Error::InvalidConfig(format!("normal noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(normals.map(|n| {
        if !is_valid_normal(n) {
            return *n;
        }
        let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let t1 = n.cross(&helper).normalize();
        let t2 = n.cross(&t1);
        (n + t1 * tilt.sample(&mut rng) + t2 * tilt.sample(&mut rng)).normalize()
    }))
}
