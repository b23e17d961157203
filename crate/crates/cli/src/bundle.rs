//! One frame of pipeline input on disk.
//!
//! ```text
//! frame_0000/
//!   intrinsics.json     camera
//!   depth_gt.pfm        ground-truth depth (or depth_gt.png, millimeters)
//!   normals.pfm         surface normals used by the pipeline
//!   plane_masks.png     16-bit plane labels, 0 = none
//!   sparse_depth.json   [{u, v, z}]
//!   gravity.json        [x, y, z] in the camera frame
//!   depth_input.pfm     optional dense depth for refinement (defaults to depth_gt)
//!   normals_gt.pfm      optional reference normals for evaluation
//!   texture.pfm         optional grayscale texture
//!   planes.json         optional ground-truth planes
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use videpth::{CameraIntrinsics, DepthImage, GravityVector, Image, NormalMap, PlaneMaskSet, SparseDepth};

use crate::io::{self, IoError, Result};

pub const INTRINSICS: &str = "intrinsics.json";
pub const DEPTH_GT: &str = "depth_gt.pfm";
pub const DEPTH_GT_PNG: &str = "depth_gt.png";
pub const DEPTH_INPUT: &str = "depth_input.pfm";
pub const NORMALS: &str = "normals.pfm";
pub const NORMALS_GT: &str = "normals_gt.pfm";
pub const MASKS: &str = "plane_masks.png";
pub const SPARSE: &str = "sparse_depth.json";
pub const GRAVITY: &str = "gravity.json";
pub const TEXTURE: &str = "texture.pfm";
pub const PLANES: &str = "planes.json";

#[derive(Debug, Clone)]
pub struct Frame {
    pub intrinsics: CameraIntrinsics,
    pub depth_gt: DepthImage,
    pub depth_input: Option<DepthImage>,
    pub normals: NormalMap,
    pub normals_gt: Option<NormalMap>,
    pub masks: PlaneMaskSet,
    pub sparse: SparseDepth,
    pub gravity: Option<GravityVector>,
    pub texture: Option<Image<f64>>,
}

fn optional<T>(path: PathBuf, read: impl FnOnce(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.exists() {
        read(&path).map(Some)
    } else {
        Ok(None)
    }
}

impl Frame {
    pub fn load(dir: &Path) -> Result<Self> {
        let k = io::read_intrinsics(&dir.join(INTRINSICS))?;
        let depth_gt = if dir.join(DEPTH_GT).exists() {
            io::read_depth(&dir.join(DEPTH_GT))?
        } else {
            io::read_depth(&dir.join(DEPTH_GT_PNG))?
        };
        let frame = Self {
            depth_gt,
            depth_input: optional(dir.join(DEPTH_INPUT), io::read_depth)?,
            normals: io::read_normals(&dir.join(NORMALS))?,
            normals_gt: optional(dir.join(NORMALS_GT), io::read_normals)?,
            masks: io::read_masks(&dir.join(MASKS))?,
            sparse: io::read_sparse(&dir.join(SPARSE), &k)?,
            gravity: optional(dir.join(GRAVITY), io::read_gravity)?,
            texture: optional(dir.join(TEXTURE), io::read_gray)?,
            intrinsics: k,
        };
        frame.check_shapes()?;
        Ok(frame)
    }

    fn check_shapes(&self) -> Result<()> {
        let k = &self.intrinsics;
        self.depth_gt.ensure_matches(k, "depth_gt")?;
        self.normals.ensure_matches(k, "normals")?;
        self.masks.ensure_matches(k, "plane_masks")?;
        if let Some(d) = &self.depth_input {
            d.ensure_matches(k, "depth_input")?;
        }
        if let Some(n) = &self.normals_gt {
            n.ensure_matches(k, "normals_gt")?;
        }
        if let Some(t) = &self.texture {
            t.ensure_matches(k, "texture")?;
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_json(&dir.join(INTRINSICS), &self.intrinsics)?;
        io::write_depth(&dir.join(DEPTH_GT), &self.depth_gt)?;
        io::write_normals(&dir.join(NORMALS), &self.normals)?;
        io::write_masks(&dir.join(MASKS), &self.masks)?;
        io::write_sparse(&dir.join(SPARSE), &self.sparse)?;
        if let Some(d) = &self.depth_input {
            io::write_depth(&dir.join(DEPTH_INPUT), d)?;
        }
        if let Some(n) = &self.normals_gt {
            io::write_normals(&dir.join(NORMALS_GT), n)?;
        }
        if let Some(g) = &self.gravity {
            io::write_gravity(&dir.join(GRAVITY), g)?;
        }
        if let Some(t) = &self.texture {
            io::write_depth(&dir.join(TEXTURE), t)?;
        }
        Ok(())
    }
}

/// Frame directories under `root` (those holding an `intrinsics.json`),
/// sorted by name.
pub fn list_frames(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|source| IoError::File {
        path: root.to_owned(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(INTRINSICS).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}
