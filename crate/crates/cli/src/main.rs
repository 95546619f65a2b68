//! Batch front end over token dumps: inspection, two-stage pruning,
//! position-id remapping, baselines, FLOPs reports, diagnostics, and a
//! strategy comparison driver. Every command that writes files also writes
//! a deterministic run manifest next to its primary output.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use nuwa_core::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned tables for humans.
    Human,
    /// Line-oriented JSON records.
    Json,
}

#[derive(Parser)]
#[command(name = "nuwa", version, about = "Visual-token pruning toolkit over TKD1 token dumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the records of a TKD1 container file.
    Inspect(InspectArgs),
    /// Stage-1 spatial-cohesion pruning of a token dump.
    Stage1(Stage1Args),
    /// Stage-2 text-modulated refinement of a stage-1 result.
    Stage2(Stage2Args),
    /// Remap kept-token indices to position ids.
    Remap(RemapArgs),
    /// Adaptive average-pooling baseline.
    Pool(PoolArgs),
    /// Seeded random-pruning baseline.
    Random(RandomArgs),
    /// Transformer FLOPs report for a pruning schedule or preset.
    Flops(FlopsArgs),
    /// Attention-entropy and object-cohesion metrics.
    Metrics(MetricsArgs),
    /// Run several strategies on one dump and tabulate overlap and cost.
    Compare(CompareArgs),
}

#[derive(Args)]
struct InspectArgs {
    /// Input TKD1 file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Args)]
struct Stage1Args {
    /// Input dump(s); batch mode with more than one.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Patches per region side.
    #[arg(long, default_value_t = 3)]
    region: usize,
    /// Candidates kept per region; default is the smallest count whose
    /// pool can fill --keep.
    #[arg(long = "per-region")]
    per_region: Option<usize>,
    /// Benchmark tokens to keep.
    #[arg(long)]
    keep: usize,
    /// Fraction of the maximum squared grid distance used as the
    /// aggregation threshold.
    #[arg(long = "dist-frac", default_value_t = nuwa_core::stage1::DEFAULT_DIST_FRAC)]
    dist_frac: f64,
    /// Key-norm quantile above which benchmark tokens become pillars.
    #[arg(long = "pillar-q", default_value_t = nuwa_core::stage1::DEFAULT_PILLAR_QUANTILE)]
    pillar_quantile: f64,
    /// Output file (single input only).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output directory for batch mode; defaults to NUWA_OUT_DIR or each
    /// input's directory.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Worker threads for batch mode.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Args)]
struct Stage2Args {
    /// Stage-1 result file.
    #[arg(long = "stage1")]
    stage1: PathBuf,
    /// Dump carrying text_embeddings (and projection when dimensions
    /// differ).
    #[arg(long)]
    dump: PathBuf,
    /// Visual tokens surviving stage 2.
    #[arg(long = "keep-final")]
    keep_final: usize,
    /// LLM layer at which pruning applies (schedule accounting only).
    #[arg(long = "switch-layer", default_value_t = nuwa_core::stage2::DEFAULT_SWITCH_LAYER)]
    switch_layer: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Rpme,
    Perc,
    Pesp,
}

#[derive(Args)]
struct RemapArgs {
    #[arg(long, value_enum)]
    strategy: Strategy,
    /// Full visual position range as start:end.
    #[arg(long)]
    range: String,
    /// Text file of ascending token indices.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Args)]
struct PoolArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Token retention ratio in (0, 1].
    #[arg(long)]
    ratio: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    keep: usize,
    #[arg(long, default_value_t = 44)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Args)]
struct FlopsArgs {
    /// Model dimensions as layers:hidden:ffn_inner.
    #[arg(long, default_value = "32:4096:11008")]
    dims: String,
    /// Schedule segments as tokensxlayers, comma separated
    /// (e.g. 112x16,16x16).
    #[arg(long)]
    schedule: Option<String>,
    /// Named configuration (vanilla, nuwa64, nuwa128, nuwa192, fastv,
    /// sparsevlm, visionzip).
    #[arg(long)]
    preset: Option<String>,
    /// Extra metric terms: attn:Q:V:D, cosine:V:D, or norm:V:D.
    /// Repeatable; composes with presets.
    #[arg(long = "overhead")]
    overheads: Vec<String>,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(subcommand)]
    metric: MetricCommand,
}

#[derive(Subcommand)]
enum MetricCommand {
    /// Visual attention entropy over the dump's attention matrix.
    Vae {
        /// Input dump(s); one value line per file.
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
    },
    /// Object-centric cohesion against a JSON object spec.
    Occ {
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON file: {"tokens": [...], "center_index": optional}.
        #[arg(long)]
        object: PathBuf,
        /// Model-set size; defaults to the object size.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
    },
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Average token budget each strategy targets.
    #[arg(long)]
    keep: usize,
    /// Comma-separated strategy names (nuwa, pooling, random).
    #[arg(long, default_value = "nuwa,pooling,random")]
    strategies: String,
    #[arg(long, default_value_t = 44)]
    seed: u64,
    /// Region side for the nuwa strategy.
    #[arg(long, default_value_t = 3)]
    region: usize,
    /// Model dimensions as layers:hidden:ffn_inner for the cost columns.
    #[arg(long, default_value = "32:4096:11008")]
    dims: String,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Inspect(args) => commands::inspect(&args.input, args.format),
        Command::Stage1(args) => commands::stage1(&args),
        Command::Stage2(args) => commands::stage2(&args),
        Command::Remap(args) => commands::remap(&args),
        Command::Pool(args) => commands::pool(&args),
        Command::Random(args) => commands::random(&args),
        Command::Flops(args) => commands::flops(&args),
        Command::Metrics(args) => match args.metric {
            MetricCommand::Vae { inputs, format } => commands::metrics_vae(&inputs, format),
            MetricCommand::Occ {
                input,
                object,
                k,
                format,
            } => commands::metrics_occ(&input, &object, k, format),
        },
        Command::Compare(args) => commands::compare(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        let code = match e {
            Error::Io { .. } => 1,
            _ => 2,
        };
        std::process::exit(code);
    }
}
