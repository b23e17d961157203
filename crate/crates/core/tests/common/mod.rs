#![allow(dead_code)]

pub mod oracles;
pub mod props;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use videpth::synth::{CameraPose, SceneConfig};
use videpth::{CameraIntrinsics, DepthImage, Image, NormalMap, Pixel, Vector3};

/// Camera used by the operation examples.
pub fn k_small() -> CameraIntrinsics {
    CameraIntrinsics::new(100.0, 100.0, 160.0, 120.0, 320, 240).unwrap()
}

/// VGA-like camera downscaled to 320x240.
pub fn k_room() -> CameraIntrinsics {
    CameraIntrinsics::new(260.0, 260.0, 159.5, 119.5, 320, 240).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fronto-parallel plane at depth `z` filling the frame.
pub fn fronto_depth(k: &CameraIntrinsics, z: f64) -> DepthImage {
    DepthImage::filled(k.width, k.height, z)
}

pub fn constant_normals(k: &CameraIntrinsics, n: Vector3<f64>) -> NormalMap {
    NormalMap::filled(k.width, k.height, n)
}

/// Unit vector perturbed from `n` by isotropic Gaussian tangent noise of
/// `sigma_deg` per axis.
pub fn jitter(n: &Vector3<f64>, sigma_deg: f64, rng: &mut impl Rng) -> Vector3<f64> {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    let g = Normal::new(0.0, sigma_deg.to_radians()).unwrap();
    (n + t1 * g.sample(rng) + t2 * g.sample(rng)).normalize()
}

pub fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    let g = Normal::new(0.0, 1.0).unwrap();
    loop {
        let v = Vector3::new(g.sample(rng), g.sample(rng), g.sample(rng));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

pub fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = a.cross(b).norm();
    c.atan2(a.dot(b)).to_degrees()
}

/// Smooth scalar test image in [0, 1].
pub fn smooth_image(w: usize, h: usize) -> Image<f64> {
    Image::from_fn(w, h, |p| {
        let (x, y) = (p.u as f64, p.v as f64);
        0.5 + 0.25 * (x / 23.0).sin() * (y / 31.0).cos() + 0.2 * ((x + y) / 57.0).sin()
    })
}

/// Smooth random unit normal field facing the camera.
pub fn smooth_normals(w: usize, h: usize, seed: u64) -> NormalMap {
    let mut r = rng(seed);
    let phase: Vec<f64> = (0..6).map(|_| r.random_range(0.0..6.28)).collect();
    Image::from_fn(w, h, |p| {
        let (x, y) = (p.u as f64, p.v as f64);
        Vector3::new(
            0.5 * (x / 40.0 + phase[0]).sin() + 0.2 * (y / 35.0 + phase[1]).cos(),
            0.5 * (y / 45.0 + phase[2]).sin() + 0.2 * (x / 50.0 + phase[3]).cos(),
            -1.0 - 0.2 * ((x + y) / 60.0 + phase[4]).sin(),
        )
        .normalize()
    })
}

pub fn pixels_where<T>(img: &Image<T>, f: impl Fn(&T) -> bool) -> Vec<Pixel> {
    img.iter_pixels().filter(|(_, x)| f(x)).map(|(p, _)| p).collect()
}

pub fn iou(a: &[Pixel], b: &[Pixel]) -> f64 {
    use std::collections::HashSet;
    let sa: HashSet<_> = a.iter().collect();
    let sb: HashSet<_> = b.iter().collect();
    let inter = sa.intersection(&sb).count() as f64;
    let uni = sa.union(&sb).count() as f64;
    if uni == 0.0 {
        1.0
    } else {
        inter / uni
    }
}

/// Default room seen from a seeded random pose.
pub fn random_room_view(seed: u64, k: CameraIntrinsics) -> SceneConfig {
    let mut r = rng(seed);
    let mut cfg = SceneConfig::default_room(k);
    cfg.camera = CameraPose {
        position: [
            r.random_range(1.0..3.0),
            r.random_range(1.0..4.0),
            r.random_range(1.0..2.0),
        ],
        yaw_deg: r.random_range(0.0..360.0),
        pitch_deg: r.random_range(-25.0..10.0),
        roll_deg: r.random_range(-20.0..20.0),
    };
    cfg
}

/// Brute-force ray/plane intersection along the unnormalized pixel ray,
/// returned as the Z depth of the hit point.
pub fn ray_plane_z(k: &CameraIntrinsics, u: f64, v: f64, n: &Vector3<f64>, d: f64) -> f64 {
    let dir = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0).normalize();
    let t = -d / n.dot(&dir);
    (dir * t).z
}
