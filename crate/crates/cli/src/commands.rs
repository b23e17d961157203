//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use videpth::enrich::enrich_frame;
use videpth::gravity::{
    build_roll_warp, warp_image, warp_normals, warp_sparse_depth, Interpolation, RollWarp,
};
use videpth::metrics::{eval_depth, eval_normals, eval_sparse};
use videpth::refine::refine_all;
use videpth::synth::{
    perturb_normals, procedural_texture, render_scene, simulate_sparse, SceneConfig,
    SparseSimConfig,
};
use videpth::{CameraIntrinsics, DepthImage, Mask, SparseDepth};

use crate::bundle::{self, Frame};
use crate::config::PipelineConfig;
use crate::io;
use crate::pipeline::run_pipeline;

#[derive(Debug, Parser)]
#[command(name = "videpth", version, about = "Plane-based sparse depth enrichment toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render synthetic room frames with ground truth and simulated sparse depth.
    GenSynthetic(GenSynthetic),
    /// Sample SLAM-like sparse depth from a dense depth image.
    SimulateSparse(SimulateSparse),
    /// Project a camera-frame point cloud to sparse depth.
    Project(Project),
    /// Roll-align an image or sparse depth with gravity.
    Warp(Warp),
    /// Refine plane annotations with RANSAC and region growing.
    RefinePlanes(RefinePlanes),
    /// Enrich sparse depth with samples from detected planes.
    Enrich(Enrich),
    /// Depth metrics of a prediction against ground truth.
    EvalDepth(EvalDepth),
    /// Normal metrics of a prediction against ground truth.
    EvalNormals(EvalNormals),
    /// Run warp, refine, enrich and eval over a dataset directory.
    Pipeline(Pipeline),
}

#[derive(Debug, Args)]
pub struct SparseSimArgs {
    /// Number of sparse points.
    #[arg(long, default_value_t = 200)]
    pub point_count: usize,
    /// 0 samples uniformly, 1 follows texture gradients only.
    #[arg(long, default_value_t = 0.7)]
    pub cluster_bias: f64,
    /// Gaussian depth noise in meters.
    #[arg(long, default_value_t = 0.0)]
    pub depth_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_fraction: f64,
    /// Outliers are scaled by Uniform(1, scale).
    #[arg(long, default_value_t = 1.5)]
    pub outlier_scale: f64,
}

impl SparseSimArgs {
    fn config(&self, seed: u64) -> SparseSimConfig {
        SparseSimConfig {
            point_count: self.point_count,
            cluster_bias: self.cluster_bias,
            depth_noise_sigma: self.depth_noise,
            outlier_fraction: self.outlier_fraction,
            outlier_scale: self.outlier_scale,
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenSynthetic {
    /// Scene description (JSON). Defaults to an empty 4 x 5 x 3 m room.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Output dataset directory; frames go to `frame_NNNN/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Frame 0 uses the scene pose, later frames a seeded random nearby pose.
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tilt noise added to `normals.pfm`, degrees; `normals_gt.pfm` stays exact.
    #[arg(long, default_value_t = 0.0)]
    pub normal_noise: f64,
    #[command(flatten)]
    pub sparse: SparseSimArgs,
}

#[derive(Debug, Args)]
pub struct SimulateSparse {
    /// Dense depth (.pfm or millimeter .png).
    #[arg(long)]
    pub depth: PathBuf,
    /// Grayscale texture (.pfm) steering clustered sampling.
    #[arg(long)]
    pub texture: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sparse: SparseSimArgs,
}

#[derive(Debug, Args)]
pub struct Project {
    /// Camera-frame points as JSON `[{x, y, z}]`.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WarpKind {
    Depth,
    Normals,
    Masks,
    Sparse,
    Texture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Nearest,
    Bilinear,
}

#[derive(Debug, Args)]
pub struct Warp {
    #[arg(long, value_enum)]
    pub kind: WarpKind,
    #[arg(long)]
    pub input: PathBuf,
    /// Gravity in the camera frame, JSON `[x, y, z]`.
    #[arg(long)]
    pub gravity: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Undo the alignment instead of applying it.
    #[arg(long)]
    pub inverse: bool,
    /// Resampling for depth and texture. Defaults to nearest for depth and
    /// bilinear for texture; normals are always bilinear, masks nearest.
    #[arg(long, value_enum)]
    pub interp: Option<InterpArg>,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    /// Pipeline config (JSON); only the relevant section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the stage's `rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl StageArgs {
    fn load(&self) -> Result<PipelineConfig> {
        match &self.config {
            Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
            None => Ok(PipelineConfig::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct RefinePlanes {
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub normals: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    /// Refined labels, 16-bit PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the fitted planes as JSON.
    #[arg(long)]
    pub planes: Option<PathBuf>,
    #[command(flatten)]
    pub stage: StageArgs,
}

#[derive(Debug, Args)]
pub struct Enrich {
    #[arg(long)]
    pub sparse: PathBuf,
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub normals: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    /// Enriched sparse depth, JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured number of plane samples.
    #[arg(long)]
    pub sample_count: Option<usize>,
    /// Also write the dense plane depth (.pfm or .png).
    #[arg(long)]
    pub incomplete: Option<PathBuf>,
    /// Also write the estimated planes as JSON.
    #[arg(long)]
    pub planes: Option<PathBuf>,
    #[command(flatten)]
    pub stage: StageArgs,
}

#[derive(Debug, Args)]
pub struct EvalDepth {
    /// Prediction: dense .pfm/.png or sparse .json.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground truth, dense .pfm/.png.
    #[arg(long)]
    pub gt: PathBuf,
    /// Restrict to pixels with a nonzero label in this PNG (dense predictions).
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Write the metrics here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalNormals {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Pipeline {
    /// Dataset directory with one subdirectory per frame.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the global seed of the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Forces the roll warp on.
    #[arg(long)]
    pub warp: bool,
    /// Per-frame outputs and `aggregate.json` go here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit nonzero if any frame fails.
    #[arg(long)]
    pub strict: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(&a),
        Command::SimulateSparse(a) => simulate(&a),
        Command::Project(a) => project(&a),
        Command::Warp(a) => warp(&a),
        Command::RefinePlanes(a) => refine_planes(&a),
        Command::Enrich(a) => enrich(&a),
        Command::EvalDepth(a) => eval_depth_cmd(&a),
        Command::EvalNormals(a) => eval_normals_cmd(&a),
        Command::Pipeline(a) => pipeline(&a),
    }
}

fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(260.0, 260.0, 159.5, 119.5, 320, 240).expect("valid default intrinsics")
}

fn gen_synthetic(a: &GenSynthetic) -> Result<()> {
    let base = match &a.scene {
        Some(p) => io::read_json::<SceneConfig>(p).with_context(|| format!("loading scene {}", p.display()))?,
        None => SceneConfig::default_room(default_intrinsics()),
    };
    base.validate()?;
    for i in 0..a.frames {
        let seed = a.seed ^ i as u64;
        let mut scene = base.clone();
        if i > 0 {
            scene.camera = base.camera.jittered(base.room, seed);
        }
        let rendered = render_scene(&scene)?;
        let texture = procedural_texture(scene.intrinsics.width, scene.intrinsics.height, seed);
        let sim = simulate_sparse(&rendered.depth, Some(&texture), &a.sparse.config(seed))?;
        let normals = if a.normal_noise > 0.0 {
            perturb_normals(&rendered.normals, a.normal_noise, seed)?
        } else {
            rendered.normals.clone()
        };
        let frame = Frame {
            intrinsics: scene.intrinsics,
            depth_gt: rendered.depth,
            depth_input: None,
            normals,
            normals_gt: Some(rendered.normals),
            masks: rendered.masks,
            sparse: sim.sparse,
            gravity: Some(rendered.gravity),
            texture: Some(texture),
        };
        let dir = a.out.join(format!("frame_{i:04}"));
        frame.save(&dir)?;
        io::write_planes(&dir.join(bundle::PLANES), &rendered.planes)?;
        io::write_json(&dir.join("scene.json"), &scene)?;
        info!("wrote {}", dir.display());
    }
    Ok(())
}

fn simulate(a: &SimulateSparse) -> Result<()> {
    let depth = io::read_depth(&a.depth)?;
    let texture = a.texture.as_deref().map(io::read_gray).transpose()?;
    let sim = simulate_sparse(&depth, texture.as_ref(), &a.sparse.config(a.seed))?;
    io::write_sparse(&a.out, &sim.sparse)?;
    Ok(())
}

fn project(a: &Project) -> Result<()> {
    let k = io::read_intrinsics(&a.intrinsics)?;
    let points = io::read_points(&a.points)?;
    io::write_sparse(&a.out, &k.project_points(&points))?;
    Ok(())
}

fn warp(a: &Warp) -> Result<()> {
    let k = io::read_intrinsics(&a.intrinsics)?;
    let g = io::read_gravity(&a.gravity)?;
    let mut w: RollWarp = build_roll_warp(&g, &k)?;
    if a.inverse {
        w = w.inverse();
    }
    let interp = |default| match a.interp {
        Some(InterpArg::Nearest) => Interpolation::Nearest,
        Some(InterpArg::Bilinear) => Interpolation::Bilinear,
        None => default,
    };
    match a.kind {
        WarpKind::Depth => {
            let d = io::read_depth(&a.input)?;
            d.ensure_matches(&k, "depth")?;
            io::write_depth(&a.out, &warp_image(&d, &w, interp(Interpolation::Nearest)))?;
        }
        WarpKind::Texture => {
            let t = io::read_gray(&a.input)?;
            t.ensure_matches(&k, "texture")?;
            io::write_depth(&a.out, &warp_image(&t, &w, interp(Interpolation::Bilinear)))?;
        }
        WarpKind::Normals => {
            let n = io::read_normals(&a.input)?;
            n.ensure_matches(&k, "normals")?;
            io::write_normals(&a.out, &warp_normals(&n, &w))?;
        }
        WarpKind::Masks => {
            let m = io::read_masks(&a.input)?;
            m.ensure_matches(&k, "masks")?;
            io::write_masks(&a.out, &warp_image(&m, &w, Interpolation::Nearest))?;
        }
        WarpKind::Sparse => {
            let s = io::read_sparse(&a.input, &k)?;
            io::write_sparse(&a.out, &warp_sparse_depth(&s, &w))?;
        }
    }
    Ok(())
}

fn refine_planes(a: &RefinePlanes) -> Result<()> {
    let cfg = a.stage.load()?;
    let mut refine = cfg.refine;
    if let Some(seed) = a.stage.seed {
        refine.rng_seed = seed;
    }
    let k = io::read_intrinsics(&a.intrinsics)?;
    let masks = io::read_masks(&a.masks)?;
    let depth = io::read_depth(&a.depth)?;
    let normals = io::read_normals(&a.normals)?;
    let refined = refine_all(&masks, &depth, &normals, &k, &refine)?;
    for (label, reason) in &refined.discarded {
        info!("annotation {label} discarded: {reason}");
    }
    io::write_masks(&a.out, &refined.masks)?;
    if let Some(p) = &a.planes {
        io::write_planes(p, &refined.planes)?;
    }
    Ok(())
}

fn enrich(a: &Enrich) -> Result<()> {
    let cfg = a.stage.load()?;
    let mut enrich = cfg.enrich;
    if let Some(seed) = a.stage.seed {
        enrich.rng_seed = seed;
    }
    if let Some(n) = a.sample_count {
        enrich.sample_count = n;
    }
    let k = io::read_intrinsics(&a.intrinsics)?;
    let sparse_bytes = io::read_bytes(&a.sparse)?;
    let sparse = io::read_sparse(&a.sparse, &k)?;
    let masks = io::read_masks(&a.masks)?;
    let normals = io::read_normals(&a.normals)?;
    let out = enrich_frame(&sparse, &masks, &normals, &k, &enrich)?;
    for (label, err) in &out.skipped {
        info!("plane {label} skipped: {err}");
    }
    // nothing added: pass the input through untouched
    if out.enriched == sparse {
        io::write_bytes(&a.out, &sparse_bytes)?;
    } else {
        io::write_sparse(&a.out, &out.enriched)?;
    }
    if let Some(p) = &a.incomplete {
        io::write_depth(p, out.incomplete.image())?;
    }
    if let Some(p) = &a.planes {
        let planes: Vec<_> = out.planes.iter().map(|e| e.plane).collect();
        io::write_planes(p, &planes)?;
    }
    Ok(())
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => io::write_json(p, value)?,
        None => print_json(value)?,
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn label_mask(path: &Path) -> Result<Mask> {
    Ok(io::read_masks(path)?.map(|&l| l != 0))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn eval_depth_cmd(a: &EvalDepth) -> Result<()> {
    let gt: DepthImage = io::read_depth(&a.gt)?;
    let metrics = if is_json(&a.pred) {
        if a.mask.is_some() {
            bail!("--mask applies to dense predictions only");
        }
        let records: Vec<io::SparseRecord> = io::read_json(&a.pred)?;
        let pred = SparseDepth::new(gt.width(), gt.height(), records.iter().map(|r| (r.u, r.v, r.z)))?;
        eval_sparse(&pred, &gt)?
    } else {
        let pred = io::read_depth(&a.pred)?;
        let mask = a.mask.as_deref().map(label_mask).transpose()?;
        eval_depth(&pred, &gt, mask.as_ref())?
    };
    emit(&metrics, a.out.as_deref())
}

fn eval_normals_cmd(a: &EvalNormals) -> Result<()> {
    let pred = io::read_normals(&a.pred)?;
    let gt = io::read_normals(&a.gt)?;
    let mask = a.mask.as_deref().map(label_mask).transpose()?;
    emit(&eval_normals(&pred, &gt, mask.as_ref())?, a.out.as_deref())
}

fn pipeline(a: &Pipeline) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.warp |= a.warp;
    let report = run_pipeline(&a.data, &cfg, a.out.as_deref())?;
    print_json(&report.aggregate)?;
    if !report.failures.is_empty() {
        let names: Vec<&str> = report.failures.iter().map(|f| f.frame.as_str()).collect();
        if a.strict {
            bail!("{} frame(s) failed: {}", names.len(), names.join(", "));
        }
        log::warn!("{} frame(s) failed and were skipped: {}", names.len(), names.join(", "));
    }
    Ok(())
}
