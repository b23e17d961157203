//! Geometric depth-enrichment pipeline for visual-inertial depth completion.
//!
//! Stages, in pipeline order:
//!
//! - [`camera`] / [`image`]: pinhole model, projection of SLAM landmarks into
//!   sparse depth, and the image containers (NaN = invalid depth).
//! - [`gravity`]: roll warps that align projected gravity with the image
//!   down axis.
//! - [`refine`]: RANSAC + region-growing cleanup of plane annotations.
//! - [`enrich`]: per-plane normal/distance consensus, incomplete depth and
//!   enriched sparse sampling.
//! - [`metrics`]: RMSE / δ-accuracy for depth and angular statistics for
//!   normals.
//! - [`synth`]: analytic planar rooms and a sparse-point noise model used as
//!   ground truth throughout the tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` is the NaN-rejecting form

pub mod camera;
pub mod enrich;
pub mod error;
pub mod gravity;
pub mod image;
pub mod metrics;
pub mod plane;
pub mod refine;
pub mod synth;

pub use camera::{Bearing, CameraIntrinsics};
pub use enrich::{EnrichConfig, EnrichResult, IncompleteDepth};
pub use error::{Error, Result};
pub use gravity::{GravityVector, Interpolation, RollWarp};
pub use image::{
    ColorImage, DepthImage, Image, Mask, NormalMap, Pixel, PlaneMaskSet, SparseDepth,
};
pub use metrics::{DepthMetrics, NormalMetrics};
pub use plane::Plane;
pub use refine::{Connectivity, RefineConfig, RefineOutcome};
pub use synth::{SceneConfig, SparseSimConfig};

pub use nalgebra::{Point3, Vector3};
