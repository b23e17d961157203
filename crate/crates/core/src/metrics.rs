//! Depth and surface-normal evaluation metrics.
//!
//! Pixels count only where both prediction and ground truth are valid (and
//! the optional mask is set). Threshold comparisons are strict.

use nalgebra::Vector3;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::image::{is_valid_depth, is_valid_normal, DepthImage, Mask, NormalMap, SparseDepth};

/// δ thresholds for `max(pred/gt, gt/pred) < δ`.
pub const DELTA_THRESHOLDS: [f64; 5] = [1.05, 1.10, 1.25, 1.5625, 1.953125];
const DELTA_KEYS: [&str; 5] = [
    "delta_1_05",
    "delta_1_10",
    "delta_1_25",
    "delta_1_25_2",
    "delta_1_25_3",
];

/// Angular-error thresholds ξ in degrees.
pub const ANGLE_THRESHOLDS: [f64; 3] = [11.25, 22.5, 30.0];
const ANGLE_KEYS: [&str; 3] = ["below_11_25", "below_22_5", "below_30_0"];

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMetrics {
    /// Meters.
    pub rmse: f64,
    /// Percentages aligned with [`DELTA_THRESHOLDS`].
    pub delta: [f64; 5],
    pub n_pixels: usize,
}

impl DepthMetrics {
    /// Percentage for one of the [`DELTA_THRESHOLDS`].
    pub fn delta_at(&self, threshold: f64) -> Option<f64> {
        DELTA_THRESHOLDS
            .iter()
            .position(|&t| t == threshold)
            .map(|i| self.delta[i])
    }
}

impl Serialize for DepthMetrics {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("DepthMetrics", 7)?;
        st.serialize_field("rmse", &self.rmse)?;
        for (key, value) in DELTA_KEYS.iter().zip(&self.delta) {
            st.serialize_field(key, value)?;
        }
        st.serialize_field("n_pixels", &self.n_pixels)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalMetrics {
    /// Mean angular error, degrees.
    pub mad: f64,
    pub median: f64,
    pub rmse: f64,
    /// Percentages aligned with [`ANGLE_THRESHOLDS`].
    pub below: [f64; 3],
    pub n_pixels: usize,
}

impl Serialize for NormalMetrics {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("NormalMetrics", 7)?;
        st.serialize_field("mad", &self.mad)?;
        st.serialize_field("median", &self.median)?;
        st.serialize_field("rmse", &self.rmse)?;
        for (key, value) in ANGLE_KEYS.iter().zip(&self.below) {
            st.serialize_field(key, value)?;
        }
        st.serialize_field("n_pixels", &self.n_pixels)?;
        st.end()
    }
}

/// Pools depth pairs across images; merging accumulators equals evaluating
/// the pooled pixels.
#[derive(Debug, Clone, Default)]
pub struct DepthAccumulator {
    sq_err: CompensatedSum,
    hits: [usize; 5],
    n: usize,
}

impl DepthAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one pair; ignored unless both depths are valid.
    #[inline]
    pub fn push(&mut self, pred: f64, gt: f64) {
        if !is_valid_depth(pred) || !is_valid_depth(gt) {
            return;
        }
        let e = pred - gt;
        self.sq_err.add(e * e);
        let ratio = (pred / gt).max(gt / pred);
        for (hit, &t) in self.hits.iter_mut().zip(&DELTA_THRESHOLDS) {
            if ratio < t {
                *hit += 1;
            }
        }
        self.n += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.sq_err.merge(&other.sq_err);
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        self.n += other.n;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn finish(&self) -> Result<DepthMetrics> {
        if self.n == 0 {
            return Err(Error::EmptyOverlap);
        }
        let n = self.n as f64;
        Ok(DepthMetrics {
            rmse: (self.sq_err.value() / n).sqrt(),
            delta: self.hits.map(|h| 100.0 * h as f64 / n),
            n_pixels: self.n,
        })
    }
}

/// Angular error in degrees, `acos(clamp(a·b))`; bitwise-equal vectors give 0.
#[inline]
pub fn angular_error_deg(pred: &Vector3<f64>, gt: &Vector3<f64>) -> f64 {
    if pred == gt {
        return 0.0;
    }
    pred.dot(gt).clamp(-1.0, 1.0).acos().to_degrees()
}

#[derive(Debug, Clone, Default)]
pub struct NormalAccumulator {
    errors: Vec<f64>,
}

impl NormalAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, pred: &Vector3<f64>, gt: &Vector3<f64>) {
        if is_valid_normal(pred) && is_valid_normal(gt) {
            self.errors.push(angular_error_deg(pred, gt));
        }
    }

    /// Adds a precomputed angular error in degrees.
    pub fn push_error(&mut self, err_deg: f64) {
        self.errors.push(err_deg);
    }

    pub fn merge(&mut self, other: &Self) {
        self.errors.extend_from_slice(&other.errors);
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn finish(&self) -> Result<NormalMetrics> {
        if self.errors.is_empty() {
            return Err(Error::EmptyOverlap);
        }
        let n = self.errors.len() as f64;
        let mut sum = CompensatedSum::default();
        let mut sq = CompensatedSum::default();
        let mut below = [0usize; 3];
        for &e in &self.errors {
            sum.add(e);
            sq.add(e * e);
            for (b, &t) in below.iter_mut().zip(&ANGLE_THRESHOLDS) {
                if e < t {
                    *b += 1;
                }
            }
        }
        let mut sorted = self.errors.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 {
            sorted[m / 2]
        } else {
            0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
        };
        Ok(NormalMetrics {
            mad: sum.value() / n,
            median,
            rmse: (sq.value() / n).sqrt(),
            below: below.map(|b| 100.0 * b as f64 / n),
            n_pixels: self.errors.len(),
        })
    }
}

fn check_mask<T>(img: &crate::image::Image<T>, mask: Option<&Mask>) -> Result<()> {
    if let Some(m) = mask {
        img.ensure_same_shape(m, "image vs mask")?;
    }
    Ok(())
}

/// Accumulates the jointly valid pixels of a depth pair.
pub fn accumulate_depth(
    pred: &DepthImage,
    gt: &DepthImage,
    mask: Option<&Mask>,
    acc: &mut DepthAccumulator,
) -> Result<()> {
    pred.ensure_same_shape(gt, "prediction vs ground truth")?;
    check_mask(gt, mask)?;
    for (i, (&p, &g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if mask.is_none_or(|m| m.data()[i]) {
            acc.push(p, g);
        }
    }
    Ok(())
}

pub fn eval_depth(pred: &DepthImage, gt: &DepthImage, mask: Option<&Mask>) -> Result<DepthMetrics> {
    let mut acc = DepthAccumulator::new();
    accumulate_depth(pred, gt, mask, &mut acc)?;
    acc.finish()
}

pub fn accumulate_normals(
    pred: &NormalMap,
    gt: &NormalMap,
    mask: Option<&Mask>,
    acc: &mut NormalAccumulator,
) -> Result<()> {
    pred.ensure_same_shape(gt, "prediction vs ground truth")?;
    check_mask(gt, mask)?;
    for (i, (p, g)) in pred.data().iter().zip(gt.data()).enumerate() {
        if mask.is_none_or(|m| m.data()[i]) {
            acc.push(p, g);
        }
    }
    Ok(())
}

pub fn eval_normals(pred: &NormalMap, gt: &NormalMap, mask: Option<&Mask>) -> Result<NormalMetrics> {
    let mut acc = NormalAccumulator::new();
    accumulate_normals(pred, gt, mask, &mut acc)?;
    acc.finish()
}

pub fn accumulate_sparse(pred: &SparseDepth, gt: &DepthImage, acc: &mut DepthAccumulator) -> Result<()> {
    if pred.width() > gt.width() || pred.height() > gt.height() {
        return Err(Error::DimensionMismatch(format!(
            "sparse {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    for &(p, z) in pred.entries() {
        acc.push(z, *gt.get(p));
    }
    Ok(())
}

/// Evaluates only the listed sparse pixels against a dense ground truth.
pub fn eval_sparse(pred: &SparseDepth, gt: &DepthImage) -> Result<DepthMetrics> {
    let mut acc = DepthAccumulator::new();
    accumulate_sparse(pred, gt, &mut acc)?;
    acc.finish()
}
