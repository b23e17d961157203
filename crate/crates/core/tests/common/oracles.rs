//! Scalar-loop reference implementations of the evaluation metrics.

#![allow(clippy::manual_clamp)]

use videpth::{DepthImage, NormalMap, Vector3};

pub struct RefDepth {
    pub rmse: f64,
    pub delta: [f64; 5],
    pub n: usize,
}

pub struct RefNormals {
    pub mad: f64,
    pub median: f64,
    pub rmse: f64,
    pub below: [f64; 3],
    pub n: usize,
}

pub fn depth_oracle(pred: &[f64], gt: &[f64], mask: Option<&[bool]>) -> Option<RefDepth> {
    let thresholds = [1.05, 1.10, 1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25];
    let mut sq = 0.0;
    let mut hits = [0usize; 5];
    let mut n = 0usize;
    for i in 0..pred.len() {
        if let Some(m) = mask {
            if !m[i] {
                continue;
            }
        }
        let (p, g) = (pred[i], gt[i]);
        if !(p.is_finite() && p > 0.0 && g.is_finite() && g > 0.0) {
            continue;
        }
        sq += (p - g) * (p - g);
        let r = if p / g > g / p { p / g } else { g / p };
        for j in 0..5 {
            if r < thresholds[j] {
                hits[j] += 1;
            }
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let mut delta = [0.0; 5];
    for j in 0..5 {
        delta[j] = 100.0 * hits[j] as f64 / n as f64;
    }
    Some(RefDepth {
        rmse: (sq / n as f64).sqrt(),
        delta,
        n,
    })
}

pub fn depth_oracle_img(pred: &DepthImage, gt: &DepthImage) -> Option<RefDepth> {
    depth_oracle(pred.data(), gt.data(), None)
}

fn zero(v: &Vector3<f64>) -> bool {
    v.x == 0.0 && v.y == 0.0 && v.z == 0.0
}

pub fn normals_oracle(pred: &NormalMap, gt: &NormalMap) -> Option<RefNormals> {
    let mut errs = Vec::new();
    for i in 0..pred.len() {
        let (a, b) = (pred.data()[i], gt.data()[i]);
        if zero(&a) || zero(&b) {
            continue;
        }
        let e = if a == b {
            0.0
        } else {
            let mut c = a.x * b.x + a.y * b.y + a.z * b.z;
            if c > 1.0 {
                c = 1.0;
            }
            if c < -1.0 {
                c = -1.0;
            }
            c.acos().to_degrees()
        };
        errs.push(e);
    }
    errors_oracle(&errs)
}

pub fn errors_oracle(errs: &[f64]) -> Option<RefNormals> {
    if errs.is_empty() {
        return None;
    }
    let n = errs.len();
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut below = [0usize; 3];
    for &e in errs {
        sum += e;
        sq += e * e;
        for (j, t) in [11.25, 22.5, 30.0].iter().enumerate() {
            if e < *t {
                below[j] += 1;
            }
        }
    }
    let mut ordered: Vec<f64> = errs.to_vec();
    ordered.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 {
        ordered[n / 2]
    } else {
        (ordered[n / 2 - 1] + ordered[n / 2]) / 2.0
    };
    Some(RefNormals {
        mad: sum / n as f64,
        median,
        rmse: (sq / n as f64).sqrt(),
        below: [
            100.0 * below[0] as f64 / n as f64,
            100.0 * below[1] as f64 / n as f64,
            100.0 * below[2] as f64 / n as f64,
        ],
        n,
    })
}
