use std::path::Path;

use serde::{Deserialize, Serialize};
use videpth::{EnrichConfig, RefineConfig};

use crate::io::{read_json, Result};

/// Which depth/normal evaluations the pipeline reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricToggles {
    /// Input sparse depth against ground truth.
    pub sparse: bool,
    /// Enriched sparse depth against ground truth.
    pub enriched: bool,
    /// Dense plane depth against ground truth.
    pub incomplete: bool,
    /// Input normals against `normals_gt.pfm`, when the frame has one.
    pub normals: bool,
}

impl Default for MetricToggles {
    fn default() -> Self {
        Self {
            sparse: true,
            enriched: true,
            incomplete: true,
            normals: true,
        }
    }
}

/// Everything the pipeline needs besides the data, as one JSON document.
///
/// Frame `i` runs with seed `seed ^ i`, which is further XORed into the
/// `rng_seed` of the refine and enrich stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub refine: RefineConfig,
    pub enrich: EnrichConfig,
    /// Roll-align every frame with its gravity before processing.
    pub warp: bool,
    /// Refine plane annotations before enrichment.
    pub refine_planes: bool,
    pub metrics: MetricToggles,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            refine: RefineConfig::default(),
            enrich: EnrichConfig::default(),
            warp: false,
            refine_planes: true,
            metrics: MetricToggles::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.refine.validate()?;
        self.enrich.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn frame_seed(&self, index: usize) -> u64 {
        self.seed ^ index as u64
    }
}
