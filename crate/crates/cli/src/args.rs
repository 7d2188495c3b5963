use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const DEFAULT_PORT: u16 = 7464;

#[derive(Debug, Parser)]
#[command(
    name = "labelfuse4d",
    version,
    about = "Multi-view label fusion for 4D clothed-human sequences"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render vertex colors of every frame from the camera rig.
    Render(RenderArgs),
    /// Label every frame of a sequence.
    Run(RunArgs),
    /// Re-run one frame with the manual corrections under `manual/`.
    Rectify(RectifyArgs),
    /// Score labels, point clouds or a simulated mesh against ground truth.
    Eval(EvalArgs),
    /// Split a labeled mesh into one mesh per label.
    Extract(ExtractArgs),
    /// Serve frames, renders and the correction endpoints over HTTP.
    Serve(ServeArgs),
    /// Write a synthetic labeled sequence with evidence and a manifest.
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Args)]
pub struct JobArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Weight overrides such as `b=0.5` or `lambda_p=1`; repeat or separate with commas.
    #[arg(long = "weights", value_delimiter = ',')]
    pub weights: Vec<String>,
    /// Vote sources for frames after the first: comma-separated `par`, `opt`, `sam` or `all`.
    #[arg(long)]
    pub toggle: Option<String>,
    /// Output root; defaults to the manifest's `output` entry.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Frame indices, e.g. `1-3` or `1,4`; all frames when absent.
    #[arg(long)]
    pub frames: Option<String>,
    /// View indices, e.g. `0-11`; all views when absent.
    #[arg(long)]
    pub views: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub job: JobArgs,
    /// Continue after the last completed frame recorded in `state.json`.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    #[command(flatten)]
    pub job: JobArgs,
    #[arg(long)]
    pub frame: usize,
    /// Recompute every later frame from the rectified labels.
    #[arg(long)]
    pub propagate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalKind {
    Labels,
    Chamfer,
    Sim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PointSource {
    /// Area-weighted samples on the surface.
    Surface,
    /// The mesh vertices.
    Vertices,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub kind: EvalKind,
    /// Predicted labels (`.l4dl`/`.txt`), points (`.xyz`) or mesh.
    #[arg(long, required_unless_present = "manifest")]
    pub pred: Option<PathBuf>,
    /// Ground truth; in batch mode a file shared by all frames or a directory of `{k}.l4dl`.
    #[arg(long)]
    pub gt: PathBuf,
    /// Rest-shape template for `sim`.
    #[arg(long, required_if_eq("kind", "sim"))]
    pub template: Option<PathBuf>,
    /// Weight of the stretching term for `sim`.
    #[arg(long, default_value_t = 1.0)]
    pub w: f64,
    #[arg(long, value_enum, default_value_t = PointSource::Surface)]
    pub points: PointSource,
    #[arg(long, default_value_t = labelfuse4d::metrics::DEFAULT_SAMPLE_COUNT)]
    pub samples: usize,
    #[arg(long, default_value_t = labelfuse4d::metrics::DEFAULT_SAMPLE_SEED)]
    pub seed: u64,
    /// Coordinate scale applied before Chamfer, e.g. 100 for meters to centimeters.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Batch mode: score the final labels of every frame of these manifests as CSV.
    #[arg(long, conflicts_with = "pred")]
    pub manifest: Vec<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Directory receiving one `{label}.ply` per label.
    #[arg(long)]
    pub out: PathBuf,
    /// Takes label names from this manifest's registry.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub job: JobArgs,
    #[arg(long, env = "LF4D_PORT", default_value_t = DEFAULT_PORT, value_parser = clap::value_parser!(u16).range(1024..))]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub frames: usize,
    /// Icosphere subdivision level.
    #[arg(long, default_value_t = 3)]
    pub level: u32,
    #[arg(long, default_value_t = 128)]
    pub image_size: usize,
    /// Fraction of parser pixels replaced by a wrong label.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}
