use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "accimg", version, about = "Accessible image generation from simplified text")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print what would be done without writing files or calling providers.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only warnings and errors on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the sampled sentence corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Generate image prompts with a chat model.
    #[command(subcommand)]
    Prompts(PromptsCmd),
    /// Generate images from prompt bundles.
    #[command(subcommand)]
    Generate(GenerateCmd),
    /// Copy images to style-blind numeric names.
    Anonymize(AnonymizeArgs),
    /// Split anonymised images between experts.
    Assign(AssignArgs),
    /// CLIPScore and template ranking.
    #[command(subcommand)]
    Score(ScoreCmd),
    /// Statistics over expert annotations.
    #[command(subcommand)]
    Eval(EvalCmd),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCmd {
    /// Clean, filter and sample the source datasets
    Build(CorpusBuildArgs),
}

#[derive(Debug, Args)]
pub struct CorpusBuildArgs {
    /// Directory holding asset, onestop, simpa and wikipedia source files.
    #[arg(long)]
    pub sources: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub per_source: Option<usize>,
    #[arg(long)]
    pub min_tokens: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    /// Also write length statistics here.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PromptsCmd {
    /// One prompt per style for every corpus sentence
    Build(PromptsBuildArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChatProvider {
    /// OpenAI-compatible chat completions endpoint.
    Http,
    /// Deterministic local prompt writer; no network.
    Offline,
}

#[derive(Debug, Args)]
pub struct PromptsBuildArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Template and version, e.g. basic_object_focus_v2.
    #[arg(long)]
    pub template: Option<String>,
    /// `all` or a comma-separated list.
    #[arg(long)]
    pub styles: Option<String>,
    #[arg(long, value_enum, default_value_t = ChatProvider::Http)]
    pub provider: ChatProvider,
    /// Chat endpoint base URL [env: CHAT_API_URL].
    #[arg(long)]
    pub chat_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum GenerateCmd {
    /// Start a run, or continue one whose checkpoint matches.
    Run(GenerateArgs),
    /// Continue an interrupted run; the checkpoint must exist.
    Resume(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageProvider {
    /// OpenAI-style image generation endpoint.
    Http,
    /// Placeholder images; prompts containing a --block-token are refused.
    Mock,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub bundles: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    /// WIDTHxHEIGHT.
    #[arg(long)]
    pub image_size: Option<String>,
    #[arg(long, value_enum, default_value_t = ImageProvider::Http)]
    pub provider: ImageProvider,
    /// Image endpoint base URL [env: GEN_API_URL].
    #[arg(long)]
    pub gen_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Mock provider only: refuse prompts containing this text.
    #[arg(long)]
    pub block_token: Vec<String>,
    /// Full run report with the moderation log (default: <out>/run_report.json).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnonymizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated expert ids.
    #[arg(long, value_delimiter = ',')]
    pub experts: Option<Vec<String>>,
    #[arg(long)]
    pub shared: Option<usize>,
    #[arg(long)]
    pub unique_per_expert: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum ScoreCmd {
    /// Score every generated image against its sentence.
    Clip(ScoreClipArgs),
    /// Rank templates by the weighted composite.
    Composite(ScoreCompositeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbeddingProvider {
    /// The embedding service at --backend-url.
    Http,
    /// Feature-hashing stand-in; no network, not a real image model.
    Hashing,
}

#[derive(Debug, Args)]
pub struct ScoreClipArgs {
    #[arg(long)]
    pub bundles: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = EmbeddingProvider::Http)]
    pub backend: EmbeddingProvider,
    /// Embedding service base URL [env: SCORER_URL].
    #[arg(long)]
    pub backend_url: Option<String>,
    /// CLIPScore rescaling weight.
    #[arg(long)]
    pub w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalization {
    MinMax,
    Raw,
}

#[derive(Debug, Args)]
pub struct ScoreCompositeArgs {
    /// One or more score files; records are grouped by template.
    #[arg(long, required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Normalization::MinMax)]
    pub normalization: Normalization,
    /// Multiplier for the displayed composite.
    #[arg(long)]
    pub display_scale: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Validate an annotation export and resolve image ids.
    Ingest(IngestArgs),
    /// Krippendorff's alpha for one dimension.
    Alpha(AlphaArgs),
    /// Style recognition Recall@3.
    Recall3(RecordsArg),
    /// Pearson correlation of CLIPScore with alignment ratings.
    Correlate(CorrelateArgs),
    /// Weighted accessibility index per style or source.
    Index(IndexArgs),
    /// Every statistic in one JSON document.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub export: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecordsArg {
    /// Records written by `eval ingest`.
    #[arg(long, default_value = "records.jsonl")]
    pub records: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    #[command(flatten)]
    pub records: RecordsArg,
    #[arg(long)]
    pub dimension: String,
    #[arg(long, default_value_t = 2)]
    pub min_raters: usize,
    /// nominal, ordinal or interval.
    #[arg(long)]
    pub metric: Option<String>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub records: RecordsArg,
    #[arg(long)]
    pub scores: PathBuf,
    /// Print only the per-expert standardised row.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub records: RecordsArg,
    /// style or dataset.
    #[arg(long, default_value = "style")]
    pub kind: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub records: RecordsArg,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Assignment file written by `assign`.
    #[arg(long)]
    pub assignments: Option<PathBuf>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}
