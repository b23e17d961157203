use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use crate::camera::Bearing;

/// Smallest `n·b` magnitude accepted when intersecting a pixel ray with a plane.
pub const RAY_PARALLEL_EPS: f64 = 1e-6;

/// Plane `n·p + d = 0` with unit `n` oriented toward the camera (`d > 0` for
/// planes in front of it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub d: f64,
}

impl Plane {
    /// Normalizes `normal` and scales `d` to match.
    pub fn new(normal: Vector3<f64>, d: f64) -> Option<Self> {
        let norm = normal.norm();
        if !(norm > 0.0) || !norm.is_finite() || !d.is_finite() {
            return None;
        }
        Some(Self {
            normal: normal / norm,
            d: d / norm,
        })
    }

    #[inline]
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) + self.d
    }

    /// Exact plane through three points, `None` when they are collinear.
    pub fn through(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<Self> {
        let (ab, ac) = (b - a, c - a);
        let cross = ab.cross(&ac);
        let scale = ab.norm() * ac.norm();
        let norm = cross.norm();
        if !(norm > 1e-9 * scale) || scale == 0.0 {
            return None;
        }
        let n = cross / norm;
        Some(Self {
            normal: n,
            d: -n.dot(&a.coords),
        })
    }

    /// Total least-squares fit: centroid plus the smallest-eigenvalue
    /// eigenvector of the scatter matrix.
    pub fn fit_least_squares(points: &[Point3<f64>]) -> Option<Self> {
        if points.len() < 3 {
            return None;
        }
        let centroid = points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords)
            / points.len() as f64;
        let mut scatter = Matrix3::zeros();
        for p in points {
            let q = p.coords - centroid;
            scatter += q * q.transpose();
        }
        let eig = SymmetricEigen::new(scatter);
        let (i_min, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))?;
        let n: Vector3<f64> = eig.eigenvectors.column(i_min).into_owned();
        let n = n.normalize();
        if !n.iter().all(|c| c.is_finite()) {
            return None;
        }
        Some(Self {
            normal: n,
            d: -n.dot(&centroid),
        })
    }

    /// Flips the plane so that `n·reference < 0`, i.e. the normal faces a
    /// camera at the origin looking at `reference`.
    pub fn facing_camera(self, reference: &Point3<f64>) -> Self {
        if self.normal.dot(&reference.coords) > 0.0 {
            Self {
                normal: -self.normal,
                d: -self.d,
            }
        } else {
            self
        }
    }

    /// Depth `z = -d / (n·b)` where the pixel ray meets the plane, `None` for
    /// rays parallel to or facing away from it.
    #[inline]
    pub fn depth_along(&self, b: Bearing) -> Option<f64> {
        let nb = self.normal.dot(&b.to_vector());
        if nb >= -RAY_PARALLEL_EPS {
            return None;
        }
        Some(-self.d / nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_plane() {
        let p = Plane::through(
            &Point3::new(0.0, 0.0, 2.0),
            &Point3::new(1.0, 0.0, 2.0),
            &Point3::new(0.0, 1.0, 2.0),
        )
        .unwrap()
        .facing_camera(&Point3::new(0.0, 0.0, 2.0));
        assert!((p.normal - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((p.d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_rejected() {
        assert!(Plane::through(
            &Point3::new(0.0, 0.0, 1.0),
            &Point3::new(1.0, 1.0, 1.0),
            &Point3::new(2.0, 2.0, 1.0),
        )
        .is_none());
    }

    #[test]
    fn least_squares_tilted_plane() {
        let n = Vector3::new(0.2, -0.9, -0.3).normalize();
        let d = 1.7;
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                // two in-plane directions
                let t1 = n.cross(&Vector3::x()).normalize();
                let t2 = n.cross(&t1);
                let q = -n * d + t1 * (i as f64 * 0.1) + t2 * (j as f64 * 0.1);
                pts.push(Point3::from(q));
            }
        }
        let fit = Plane::fit_least_squares(&pts).unwrap().facing_camera(&pts[0]);
        assert!((fit.normal - n).norm() < 1e-9);
        assert!((fit.d - d).abs() < 1e-9);
    }

    #[test]
    fn depth_along_parallel_ray() {
        let p = Plane::new(Vector3::new(-1.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(p.depth_along(Bearing { x: 0.0, y: 0.0 }), None);
        let wall = Plane::new(Vector3::new(0.0, 0.0, -1.0), 2.0).unwrap();
        assert_eq!(wall.depth_along(Bearing { x: 0.0, y: 0.0 }), Some(2.0));
    }
}
