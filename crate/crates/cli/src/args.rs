//! Command-line surface. Every option is optional at parse time; required
//! values are enforced after the config file is merged in, so any flag can
//! come from either place.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "vistile",
    version,
    about = "Tiling plans, tile preprocessing, forward traces, training manifests, and extraction evaluation",
    propagate_version = true
)]
pub struct Cli {
    /// Key=value config file; explicit flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Compute a tiling plan for given image dimensions.
    Plan(PlanArgs),
    /// Tile an image on disk and write the views plus a plan sidecar.
    Preprocess(PreprocessArgs),
    /// Run the deterministic forward path and emit a shape trace.
    Forward(ForwardArgs),
    /// Materialize a training mixture manifest from a mixture table.
    Mixture(MixtureArgs),
    /// Validate a stage schedule and report violations.
    Schedule(ScheduleArgs),
    /// Score an evaluation set against an inference client.
    Eval(EvalArgs),
    /// Aggregate a results file into an evaluation report.
    Report(ReportArgs),
}

/// Tiling options shared by plan, preprocess, and forward.
#[derive(Args)]
pub struct TilingArgs {
    /// Minimum total tiles (default 1).
    #[arg(long, value_name = "N")]
    pub min_tiles: Option<u32>,
    /// Maximum total tiles (default 6).
    #[arg(long, value_name = "N")]
    pub max_tiles: Option<u32>,
    /// Tile edge in pixels (default 448).
    #[arg(long, value_name = "PX")]
    pub tile_size: Option<u32>,
    /// Drop the thumbnail view from multi-tile plans.
    #[arg(long)]
    pub no_thumbnail: bool,
    /// Plan multi-scale crops (primary grid, coarser secondary grid,
    /// thumbnail) instead of a single dynamic grid.
    #[arg(long)]
    pub msac: bool,
}

/// Model dimensions shared by forward.
#[derive(Args)]
pub struct ModelArgs {
    /// Square patch edge in pixels; must divide the tile size (default 14).
    #[arg(long, value_name = "PX")]
    pub patch_size: Option<u32>,
    /// Encoder width (default 64).
    #[arg(long, value_name = "D")]
    pub vit_dim: Option<usize>,
    /// Encoder depth (default 2).
    #[arg(long, value_name = "N")]
    pub vit_layers: Option<usize>,
    /// Attention heads; must divide the encoder width (default 4).
    #[arg(long, value_name = "N")]
    pub vit_heads: Option<usize>,
    /// Projected width (default 128).
    #[arg(long, value_name = "D")]
    pub llm_dim: Option<usize>,
    /// Token-merge block edge (default 2).
    #[arg(long, value_name = "B")]
    pub shuffle_block: Option<usize>,
    /// Weight-initialization seed (default 0).
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct PlanArgs {
    /// Source image width in pixels.
    #[arg(long, value_name = "PX")]
    pub width: Option<u32>,
    /// Source image height in pixels.
    #[arg(long, value_name = "PX")]
    pub height: Option<u32>,
    #[command(flatten)]
    pub tiling: TilingArgs,
    /// Write the plan JSON here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PreprocessArgs {
    /// Source image file.
    #[arg(long, value_name = "PATH")]
    pub image: Option<PathBuf>,
    /// Directory for the view PNGs and the plan sidecar.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub tiling: TilingArgs,
    /// Worker threads for view encoding (default 1).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Args)]
pub struct ForwardArgs {
    /// Source image file.
    #[arg(long, value_name = "PATH")]
    pub image: Option<PathBuf>,
    /// Prompt appended after the image blocks.
    #[arg(long, value_name = "TEXT")]
    pub prompt: Option<String>,
    #[command(flatten)]
    pub tiling: TilingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Write the shape-trace JSON here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MixtureArgs {
    /// Bundled stage name (with or without .csv) or a mixture CSV path.
    #[arg(long, value_name = "NAME|PATH")]
    pub table: Option<String>,
    /// Fraction of every row to keep, in (0, 1] (default 1.0).
    #[arg(long, value_name = "FRACTION")]
    pub scale: Option<f64>,
    /// Shuffle seed (default 0).
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Write the manifest here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScheduleArgs {
    /// Bundled stage name or a schedule file path.
    #[arg(long, value_name = "NAME|PATH")]
    pub conf: Option<String>,
    /// Stage kind to validate against: projector_only, vision_and_projector,
    /// language_and_projector, or full. Inferred for bundled stage names.
    #[arg(long, value_name = "KIND")]
    pub stage_kind: Option<String>,
    /// Write the validation report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Evaluation set (JSON lines, one sample per line).
    #[arg(long, value_name = "PATH")]
    pub set: Option<PathBuf>,
    /// Inference client: replay or http (default replay).
    #[arg(long, value_name = "KIND")]
    pub client: Option<String>,
    /// Replay directory holding one <id>.txt per sample (default: a
    /// `replay` directory next to the set file).
    #[arg(long, value_name = "DIR")]
    pub replay_dir: Option<PathBuf>,
    /// HTTP endpoint URL (default: the VISTILE_ENDPOINT env var).
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Model name sent to the HTTP endpoint (default vistile).
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
    /// Per-request timeout in seconds (default 30).
    #[arg(long, value_name = "SECS")]
    pub timeout_secs: Option<u64>,
    /// Concurrent in-flight requests (default 4).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Results file (default: the set path with a .results.jsonl suffix).
    #[arg(long, value_name = "PATH")]
    pub results: Option<PathBuf>,
    /// Report file (default: the set path with a .report.json suffix).
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Results file written by eval.
    #[arg(long, value_name = "PATH")]
    pub results: Option<PathBuf>,
    /// Write the report JSON here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
