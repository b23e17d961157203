//! Pinhole camera model and point-cloud projection.
//!
//! Camera frame convention: X right, Y down, Z forward. Pixel `(u, v)` is
//! column `u`, row `v`, and integer coordinates are pixel centers.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Pixel, SparseDepth};

/// Pinhole intrinsics with the image size they apply to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Z-normalized ray direction `(x, y, 1)` of a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bearing {
    pub x: f64,
    pub y: f64,
}

impl Bearing {
    #[inline]
    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, 1.0)
    }

    /// Point along the ray with the given Z depth.
    #[inline]
    pub fn at_depth(self, z: f64) -> Point3<f64> {
        Point3::new(self.x * z, self.y * z, z)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidIntrinsics("non-finite parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidIntrinsics("empty image size".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    #[inline]
    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.width && (v as usize) < self.height
    }

    /// Bearing of an in-bounds pixel.
    pub fn backproject(&self, u: i64, v: i64) -> Result<Bearing> {
        if !self.contains(u, v) {
            return Err(Error::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.bearing(u as f64, v as f64))
    }

    /// Bearing at continuous pixel coordinates, no bounds check.
    #[inline]
    pub fn bearing(&self, u: f64, v: f64) -> Bearing {
        Bearing {
            x: (u - self.cx) / self.fx,
            y: (v - self.cy) / self.fy,
        }
    }

    #[inline]
    pub fn bearing_at(&self, px: Pixel) -> Bearing {
        self.bearing(px.u as f64, px.v as f64)
    }

    /// Continuous pixel coordinates of a point in front of the camera.
    #[inline]
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }

    /// Nearest pixel to continuous coordinates, if it lies inside the image.
    /// Ties round toward +infinity.
    #[inline]
    pub fn pixel_at(&self, u: f64, v: f64) -> Option<Pixel> {
        if !u.is_finite() || !v.is_finite() {
            return None;
        }
        let (ui, vi) = (round_half_up(u), round_half_up(v));
        if self.contains(ui, vi) {
            Some(Pixel::new(ui as usize, vi as usize))
        } else {
            None
        }
    }

    /// Projects a cloud into a sparse depth list. Points behind the camera or
    /// outside the frame are dropped; on collision the nearest point wins.
    pub fn project_points(&self, cloud: &[Point3<f64>]) -> SparseDepth {
        let mut best: BTreeMap<Pixel, f64> = BTreeMap::new();
        for p in cloud {
            if !(p.z > 0.0) || !p.x.is_finite() || !p.y.is_finite() || !p.z.is_finite() {
                continue;
            }
            let (u, v) = self.project(p);
            let Some(px) = self.pixel_at(u, v) else {
                continue;
            };
            best.entry(px)
                .and_modify(|z| {
                    if p.z < *z {
                        *z = p.z
                    }
                })
                .or_insert(p.z);
        }
        SparseDepth::from_sorted_map(self.width, self.height, best)
    }
}

#[inline]
pub(crate) fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}
