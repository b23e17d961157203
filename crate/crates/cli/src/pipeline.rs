//! warp -> refine -> enrich -> eval over a dataset directory.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use videpth::enrich::enrich_frame;
use videpth::gravity::{build_roll_warp, warp_image, warp_normals, warp_sparse_depth, Interpolation};
use videpth::metrics::{
    accumulate_depth, accumulate_normals, accumulate_sparse, DepthAccumulator, DepthMetrics,
    NormalAccumulator, NormalMetrics,
};
use videpth::refine::refine_all;
use videpth::{EnrichConfig, RefineConfig};

use crate::bundle::{list_frames, Frame};
use crate::config::PipelineConfig;
use crate::io::{self, IoError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Core(#[from] videpth::Error),
    #[error("warp requested but the frame has no gravity.json")]
    MissingGravity,
    #[error("no frame directories under {0}")]
    NoFrames(PathBuf),
}

/// Pooled accumulators; one per reported metric.
#[derive(Debug, Clone, Default)]
pub struct Accumulators {
    pub sparse: DepthAccumulator,
    pub enriched: DepthAccumulator,
    pub incomplete: DepthAccumulator,
    pub normals: NormalAccumulator,
}

impl Accumulators {
    pub fn merge(&mut self, other: &Self) {
        self.sparse.merge(&other.sparse);
        self.enriched.merge(&other.enriched);
        self.incomplete.merge(&other.incomplete);
        self.normals.merge(&other.normals);
    }

    /// Metrics over everything accumulated; empty sets are omitted.
    pub fn finish(&self) -> Metrics {
        Metrics {
            sparse: self.sparse.finish().ok(),
            enriched: self.enriched.finish().ok(),
            incomplete: self.incomplete.finish().ok(),
            normals: self.normals.finish().ok(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparse: Option<DepthMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enriched: Option<DepthMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incomplete: Option<DepthMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normals: Option<NormalMetrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameReport {
    pub frame: String,
    pub seed: u64,
    /// Applied roll correction in degrees, when warping.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roll_deg: Option<f64>,
    pub planes: usize,
    pub discarded_annotations: usize,
    pub skipped_planes: usize,
    pub sparse_points: usize,
    pub enriched_points: usize,
    pub metrics: Metrics,
}

/// Intermediate products of one frame, in the (possibly warped) frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub report: FrameReport,
    pub accumulators: Accumulators,
    pub enrich: videpth::EnrichResult,
    pub masks: videpth::PlaneMaskSet,
}

pub fn process_frame(
    name: &str,
    mut frame: Frame,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<FrameOutput, PipelineError> {
    let k = frame.intrinsics;
    let mut roll_deg = None;
    if cfg.warp {
        let g = frame.gravity.as_ref().ok_or(PipelineError::MissingGravity)?;
        let w = build_roll_warp(g, &k)?;
        roll_deg = Some(w.angle().to_degrees());
        frame.depth_gt = warp_image(&frame.depth_gt, &w, Interpolation::Nearest);
        frame.depth_input = frame
            .depth_input
            .map(|d| warp_image(&d, &w, Interpolation::Nearest));
        frame.normals = warp_normals(&frame.normals, &w);
        frame.normals_gt = frame.normals_gt.map(|n| warp_normals(&n, &w));
        frame.masks = warp_image(&frame.masks, &w, Interpolation::Nearest);
        frame.sparse = warp_sparse_depth(&frame.sparse, &w);
    }

    let mut discarded = 0;
    if cfg.refine_planes {
        let refine_cfg = RefineConfig {
            rng_seed: cfg.refine.rng_seed ^ seed,
            ..cfg.refine.clone()
        };
        let depth = frame.depth_input.as_ref().unwrap_or(&frame.depth_gt);
        let refined = refine_all(&frame.masks, depth, &frame.normals, &k, &refine_cfg)?;
        for (label, reason) in &refined.discarded {
            info!("{name}: annotation {label} discarded: {reason}");
        }
        discarded = refined.discarded.len();
        frame.masks = refined.masks;
    }

    let enrich_cfg = EnrichConfig {
        rng_seed: cfg.enrich.rng_seed ^ seed,
        ..cfg.enrich.clone()
    };
    let enrich = enrich_frame(&frame.sparse, &frame.masks, &frame.normals, &k, &enrich_cfg)?;
    for (label, err) in &enrich.skipped {
        info!("{name}: plane {label} skipped: {err}");
    }

    let mut acc = Accumulators::default();
    let toggles = &cfg.metrics;
    if toggles.sparse {
        accumulate_sparse(&frame.sparse, &frame.depth_gt, &mut acc.sparse)?;
    }
    if toggles.enriched {
        accumulate_sparse(&enrich.enriched, &frame.depth_gt, &mut acc.enriched)?;
    }
    if toggles.incomplete {
        accumulate_depth(enrich.incomplete.image(), &frame.depth_gt, None, &mut acc.incomplete)?;
    }
    if toggles.normals {
        if let Some(gt) = &frame.normals_gt {
            accumulate_normals(&frame.normals, gt, None, &mut acc.normals)?;
        }
    }

    let report = FrameReport {
        frame: name.to_owned(),
        seed,
        roll_deg,
        planes: enrich.planes.len(),
        discarded_annotations: discarded,
        skipped_planes: enrich.skipped.len(),
        sparse_points: frame.sparse.len(),
        enriched_points: enrich.enriched.len(),
        metrics: acc.finish(),
    };
    Ok(FrameOutput {
        report,
        accumulators: acc,
        enrich,
        masks: frame.masks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameFailure {
    pub frame: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub frames: Vec<FrameReport>,
    pub failures: Vec<FrameFailure>,
    /// Metrics over the pooled pixels of all successful frames.
    pub aggregate: Metrics,
}

fn frame_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

/// Runs every frame under `root`. Failed frames are logged and recorded in
/// the report; they never abort the run. When `out` is given, per-frame
/// reports, enriched depth and the aggregate are written there.
pub fn run_pipeline(
    root: &Path,
    cfg: &PipelineConfig,
    out: Option<&Path>,
) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let dirs = list_frames(root)?;
    if dirs.is_empty() {
        return Err(PipelineError::NoFrames(root.to_owned()));
    }
    let mut pooled = Accumulators::default();
    let mut frames = Vec::new();
    let mut failures = Vec::new();
    for (index, dir) in dirs.iter().enumerate() {
        let name = frame_name(dir);
        let seed = cfg.frame_seed(index);
        let result = Frame::load(dir)
            .map_err(PipelineError::from)
            .and_then(|frame| process_frame(&name, frame, cfg, seed));
        match result {
            Ok(output) => {
                if let Some(out) = out {
                    let fdir = out.join(&name);
                    io::write_json(&fdir.join("metrics.json"), &output.report)?;
                    io::write_sparse(&fdir.join("enriched_depth.json"), &output.enrich.enriched)?;
                    io::write_depth(&fdir.join("incomplete_depth.pfm"), output.enrich.incomplete.image())?;
                    io::write_masks(&fdir.join("plane_masks.png"), &output.masks)?;
                }
                pooled.merge(&output.accumulators);
                frames.push(output.report);
            }
            Err(e) => {
                warn!("{name}: {e}");
                failures.push(FrameFailure {
                    frame: name,
                    error: e.to_string(),
                });
            }
        }
    }
    let report = PipelineReport {
        frames,
        failures,
        aggregate: pooled.finish(),
    };
    if let Some(out) = out {
        io::write_json(&out.join("aggregate.json"), &report)?;
    }
    Ok(report)
}
