use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use owdet_core::io::ReportFormat;
use owdet_core::{ApIntegration, OperatingPoint, ScoreGrid, DEFAULT_MERGE_TAU};

#[derive(Debug, Parser)]
#[command(name = "owdet", version, about = "Open-world detection evaluation and pipeline tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class-agnostic AP over IoU thresholds.
    EvalCaap(CaapArgs),
    /// Semantic naming AP over label-similarity thresholds.
    EvalSnap(SnapArgs),
    /// U-AP, U-PRE, U-REC and U-F1 for unknown objects.
    EvalUnknown(UnknownArgs),
    /// Merge user and generated vocabularies, dropping near-duplicates.
    MergeVocab(MergeArgs),
    /// Generate labels and detections for a directory of images.
    PipelineRun(PipelineArgs),
    /// Fetch label embeddings into a JSONL file.
    EmbedFetch(EmbedArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Auc,
    Tmean,
}

impl From<Method> for ApIntegration {
    fn from(m: Method) -> Self {
        match m {
            Method::Auc => ApIntegration::AucAllPoints,
            Method::Tmean => ApIntegration::ThresholdMean,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

/// Comma-separated thresholds such as `0.5,0.75`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

fn parse_list(s: &str) -> Result<FloatList, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(FloatList)
}

fn parse_grid(s: &str) -> Result<ScoreGrid, String> {
    if s == "distinct" {
        return Ok(ScoreGrid::DistinctScores);
    }
    match s.strip_prefix("uniform:") {
        Some(step) => step
            .parse::<f64>()
            .map(|step| ScoreGrid::UniformGrid { step })
            .map_err(|e| format!("{step:?}: {e}")),
        None => Err("expected \"distinct\" or \"uniform:STEP\"".into()),
    }
}

fn parse_operating_point(s: &str) -> Result<OperatingPoint, String> {
    if s == "best-f1" {
        return Ok(OperatingPoint::BestF1);
    }
    match s.strip_prefix("score:") {
        Some(v) => v
            .parse::<f64>()
            .map(OperatingPoint::FixedScore)
            .map_err(|e| format!("{v:?}: {e}")),
        None => Err("expected \"best-f1\" or \"score:THETA\"".into()),
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// COCO-style ground-truth JSON.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection JSON array.
    #[arg(long)]
    pub dets: PathBuf,
    /// Category name whose annotations count as unlabeled.
    #[arg(long)]
    pub unknown_category: Option<String>,
    /// Drop detections on images missing from the ground truth instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ApArgs {
    #[arg(long, value_enum, default_value = "auc")]
    pub method: Method,
    /// "distinct" or "uniform:STEP"; used by the tmean method.
    #[arg(long, value_parser = parse_grid, default_value = "distinct")]
    pub score_grid: ScoreGrid,
}

#[derive(Debug, Args)]
pub struct CaapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated IoU thresholds.
    #[arg(long, value_parser = parse_list)]
    pub iou_list: Option<FloatList>,
    #[command(flatten)]
    pub ap: ApArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SnapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// JSONL file of {"label", "vector"} records.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Comma-separated similarity thresholds.
    #[arg(long, value_parser = parse_list)]
    pub sim_list: Option<FloatList>,
    #[command(flatten)]
    pub ap: ApArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct UnknownArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// "best-f1" or "score:THETA".
    #[arg(long, value_parser = parse_operating_point, default_value = "best-f1")]
    pub operating_point: OperatingPoint,
    /// Evaluate only unlabeled ground-truth objects.
    #[arg(long)]
    pub unknown_only: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// User labels, one per line.
    #[arg(long)]
    pub user: PathBuf,
    /// Generated labels, one per line.
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MERGE_TAU)]
    pub tau: f64,
    /// Merged labels, one per line.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProviderArgs {
    /// Model name sent to every provider.
    #[arg(long, default_value = "")]
    pub model: String,
    /// Environment variable holding a bearer token.
    #[arg(long)]
    pub auth_env: Option<String>,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub prompt: Option<String>,
    /// Use deterministic mock providers.
    #[arg(long)]
    pub mock: bool,
    #[arg(long, required_unless_present = "mock")]
    pub llm_endpoint: Option<String>,
    #[arg(long, required_unless_present = "mock")]
    pub detector_endpoint: Option<String>,
    /// Embedding endpoint, used when merging.
    #[arg(long)]
    pub embed_endpoint: Option<String>,
    /// Merge generated labels with --user before detecting.
    #[arg(long, requires = "user")]
    pub merge: bool,
    #[arg(long)]
    pub user: Option<PathBuf>,
    /// Precomputed embeddings for merging.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MERGE_TAU)]
    pub tau: f64,
    /// Detection output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest output file; defaults to the detection path with a .manifest.json extension.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub parallel: usize,
    /// Fail without writing output if any image fails.
    #[arg(long)]
    pub strict: bool,
    /// With --mock: make requests for this image fail (repeatable).
    #[arg(long)]
    pub mock_fail_image: Vec<String>,
    /// With --mock-fail-image: fail only the first N requests per image.
    #[arg(long)]
    pub mock_fail_first: Option<u32>,
    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Labels, one per line.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, required_unless_present = "mock")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub mock: bool,
    /// Vector size of the mock embedder.
    #[arg(long, default_value_t = 512)]
    pub mock_dimension: usize,
    /// Add to the existing output file instead of replacing it.
    #[arg(long)]
    pub append: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub provider: ProviderArgs,
}
