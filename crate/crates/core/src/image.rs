//! Image containers shared by every stage.
//!
//! Invalid depth is NaN, invalid normals are the zero vector and label 0
//! means "no plane".

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};

/// Default upper bound on valid depth, meters.
pub const DEFAULT_MAX_DEPTH: f64 = 20.0;

/// Integer pixel position. Orders row-major (by `v`, then `u`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pixel {
    pub u: usize,
    pub v: usize,
}

impl Pixel {
    #[inline]
    pub const fn new(u: usize, v: usize) -> Self {
        Self { u, v }
    }
}

impl Ord for Pixel {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.v, self.u).cmp(&(other.v, other.u))
    }
}

impl PartialOrd for Pixel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Row-major 2D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type DepthImage = Image<f64>;
pub type NormalMap = Image<Vector3<f64>>;
/// Per-pixel plane instance labels, 0 = no plane.
pub type PlaneMaskSet = Image<u16>;
pub type Mask = Image<bool>;
/// Three-channel float image (e.g. RGB in [0, 1]).
pub type ColorImage = Image<[f64; 3]>;

impl<T: Clone> Image<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Image<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} image",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(Pixel) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(Pixel::new(u, v)));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, px: Pixel) -> usize {
        px.v * self.width + px.u
    }

    #[inline]
    pub fn pixel_of(&self, index: usize) -> Pixel {
        Pixel::new(index % self.width, index / self.width)
    }

    #[inline]
    pub fn contains(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.width && (v as usize) < self.height
    }

    #[inline]
    pub fn get(&self, px: Pixel) -> &T {
        &self.data[px.v * self.width + px.u]
    }

    #[inline]
    pub fn at(&self, u: i64, v: i64) -> Option<&T> {
        if self.contains(u, v) {
            Some(&self.data[v as usize * self.width + u as usize])
        } else {
            None
        }
    }

    #[inline]
    pub fn set(&mut self, px: Pixel, value: T) {
        let i = self.index_of(px);
        self.data[i] = value;
    }

    pub fn same_shape<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn ensure_same_shape<U>(&self, other: &Image<U>, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn ensure_matches(&self, k: &CameraIntrinsics, what: &str) -> Result<()> {
        if self.width == k.width && self.height == k.height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what} is {}x{} but the camera is {}x{}",
                self.width, self.height, k.width, k.height
            )))
        }
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Iterates `(pixel, value)` in row-major order.
    pub fn iter_pixels(&self) -> impl Iterator<Item = (Pixel, &T)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, x)| (Pixel::new(i % w, i / w), x))
    }
}

#[inline]
pub fn is_valid_depth(z: f64) -> bool {
    z.is_finite() && z > 0.0
}

#[inline]
pub fn is_valid_normal(n: &Vector3<f64>) -> bool {
    n.x != 0.0 || n.y != 0.0 || n.z != 0.0
}

impl Image<f64> {
    /// All-NaN depth image.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self::filled(width, height, f64::NAN)
    }

    /// Builds a depth image, rejecting values that are neither NaN nor a
    /// positive finite depth.
    pub fn depth_from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let img = Self::from_vec(width, height, data)?;
        img.check_depth_range(f64::INFINITY)?;
        Ok(img)
    }

    /// Checks that every non-NaN value lies in `(0, max_depth)`.
    pub fn check_depth_range(&self, max_depth: f64) -> Result<()> {
        for (px, &z) in self.iter_pixels() {
            if z.is_nan() {
                continue;
            }
            if !(z > 0.0 && z < max_depth) {
                return Err(Error::InvalidDepth {
                    u: px.u,
                    v: px.v,
                    value: z,
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn depth(&self, px: Pixel) -> Option<f64> {
        let z = *self.get(px);
        is_valid_depth(z).then_some(z)
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|z| is_valid_depth(**z)).count()
    }
}

impl Image<Vector3<f64>> {
    pub fn invalid_normals(width: usize, height: usize) -> Self {
        Self::filled(width, height, Vector3::zeros())
    }

    #[inline]
    pub fn normal(&self, px: Pixel) -> Option<Vector3<f64>> {
        let n = *self.get(px);
        is_valid_normal(&n).then_some(n)
    }

    /// Checks the unit-norm invariant on every valid normal.
    pub fn check_unit(&self, tol: f64) -> bool {
        self.data
            .iter()
            .filter(|n| is_valid_normal(n))
            .all(|n| (n.norm() - 1.0).abs() <= tol)
    }
}

impl Image<u16> {
    /// Distinct non-zero labels in ascending order.
    pub fn labels(&self) -> Vec<u16> {
        let mut seen = vec![false; u16::MAX as usize + 1];
        for &l in &self.data {
            seen[l as usize] = true;
        }
        (1..=u16::MAX).filter(|&l| seen[l as usize]).collect()
    }

    /// Row-major pixels carrying `label`.
    pub fn pixels_of(&self, label: u16) -> Vec<Pixel> {
        self.iter_pixels()
            .filter(|(_, &l)| l == label)
            .map(|(p, _)| p)
            .collect()
    }

    /// Renumbers labels to the dense range `1..=K`, preserving their order.
    pub fn compact_labels(&self) -> Self {
        let mut remap = vec![0u16; u16::MAX as usize + 1];
        for (i, l) in self.labels().into_iter().enumerate() {
            remap[l as usize] = (i + 1) as u16;
        }
        self.map(|&l| remap[l as usize])
    }
}

impl Image<bool> {
    pub fn from_pixels(width: usize, height: usize, pixels: &[Pixel]) -> Self {
        let mut m = Self::filled(width, height, false);
        for &p in pixels {
            m.set(p, true);
        }
        m
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn pixels(&self) -> Vec<Pixel> {
        self.iter_pixels().filter(|(_, &b)| b).map(|(p, _)| p).collect()
    }
}

/// Pixel-indexed sparse depth, kept sorted row-major with one entry per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepth {
    width: usize,
    height: usize,
    entries: Vec<(Pixel, f64)>,
}

impl SparseDepth {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            entries: Vec::new(),
        }
    }

    /// Validates and sorts raw `(u, v, z)` entries.
    pub fn new(
        width: usize,
        height: usize,
        entries: impl IntoIterator<Item = (i64, i64, f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (u, v, z) in entries {
            if u < 0 || v < 0 || u as usize >= width || v as usize >= height {
                return Err(Error::OutOfBounds {
                    u,
                    v,
                    width,
                    height,
                });
            }
            let px = Pixel::new(u as usize, v as usize);
            if !is_valid_depth(z) {
                return Err(Error::InvalidDepth {
                    u: px.u,
                    v: px.v,
                    value: z,
                });
            }
            if map.insert(px, z).is_some() {
                return Err(Error::DuplicatePixel { u: px.u, v: px.v });
            }
        }
        Ok(Self::from_sorted_map(width, height, map))
    }

    pub(crate) fn from_sorted_map(width: usize, height: usize, map: BTreeMap<Pixel, f64>) -> Self {
        Self {
            width,
            height,
            entries: map.into_iter().collect(),
        }
    }

    /// Collects valid pixels of a dense depth image.
    pub fn from_depth_image(img: &DepthImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            entries: img
                .iter_pixels()
                .filter(|(_, z)| is_valid_depth(**z))
                .map(|(p, &z)| (p, z))
                .collect(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn entries(&self) -> &[(Pixel, f64)] {
        &self.entries
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, px: Pixel) -> Option<f64> {
        self.entries
            .binary_search_by(|(p, _)| p.cmp(&px))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn contains(&self, px: Pixel) -> bool {
        self.get(px).is_some()
    }

    /// Dense grid with NaN everywhere except the listed pixels.
    pub fn to_image(&self) -> DepthImage {
        let mut img = DepthImage::invalid(self.width, self.height);
        for &(p, z) in &self.entries {
            img.set(p, z);
        }
        img
    }
}

/// Rasterizes raw sparse entries for a camera, enforcing bounds and uniqueness.
pub fn sparse_to_image(
    entries: impl IntoIterator<Item = (i64, i64, f64)>,
    k: &CameraIntrinsics,
) -> Result<DepthImage> {
    Ok(SparseDepth::new(k.width, k.height, entries)?.to_image())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 160.0, 120.0, 320, 240).unwrap()
    }

    #[test]
    fn empty_sparse_is_all_nan() {
        let img = sparse_to_image(std::iter::empty(), &k()).unwrap();
        assert_eq!(img.valid_count(), 0);
        assert!(img.data().iter().all(|z| z.is_nan()));
    }

    #[test]
    fn single_entry_image() {
        let img = sparse_to_image([(0, 0, 1.5)], &k()).unwrap();
        assert_eq!(img.valid_count(), 1);
        assert_eq!(img.depth(Pixel::new(0, 0)), Some(1.5));
    }

    #[test]
    fn duplicate_and_out_of_bounds_entries() {
        assert_eq!(
            sparse_to_image([(3, 4, 1.0), (3, 4, 2.0)], &k()),
            Err(Error::DuplicatePixel { u: 3, v: 4 })
        );
        assert!(matches!(
            sparse_to_image([(320, 0, 1.0)], &k()),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            sparse_to_image([(1, 1, 0.0)], &k()),
            Err(Error::InvalidDepth { .. })
        ));
    }

    #[test]
    fn sparse_entries_sorted_row_major() {
        let sd = SparseDepth::new(10, 10, [(5, 2, 1.0), (1, 3, 2.0), (9, 0, 3.0)]).unwrap();
        let order: Vec<_> = sd.entries().iter().map(|(p, _)| (p.u, p.v)).collect();
        assert_eq!(order, vec![(9, 0), (5, 2), (1, 3)]);
        assert_eq!(sd.get(Pixel::new(1, 3)), Some(2.0));
        assert_eq!(sd.get(Pixel::new(1, 4)), None);
    }

    #[test]
    fn compact_labels_is_dense() {
        let m = PlaneMaskSet::from_vec(4, 1, vec![0, 7, 3, 7]).unwrap();
        let c = m.compact_labels();
        assert_eq!(c.data(), &[0, 2, 1, 2]);
        assert_eq!(c.labels(), vec![1, 2]);
    }

    #[test]
    fn depth_range_check() {
        let img = DepthImage::from_vec(2, 1, vec![f64::NAN, 25.0]).unwrap();
        assert!(img.check_depth_range(DEFAULT_MAX_DEPTH).is_err());
        assert!(img.check_depth_range(30.0).is_ok());
        assert!(DepthImage::depth_from_vec(1, 1, vec![-1.0]).is_err());
    }
}
