use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Word spotting with attribute embeddings.
///
/// Relative manifest paths are resolved against `WORDSPOT_DATA_ROOT` when
/// that variable is set. Exit status: 0 on success, 2 for configuration
/// errors, 3 for data errors, 4 for numeric failures.
#[derive(Debug, Parser)]
#[command(name = "wordspot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic word image corpus.
    Synth(SynthArgs),
    /// Train a network on the train partition of a manifest.
    Train(TrainArgs),
    /// Write string or image embeddings.
    Embed(EmbedArgs),
    /// Rank with one protocol and write its AP report.
    Spot(SpotArgs),
    /// Run every applicable protocol on the test (and query) partitions.
    Eval(EvalArgs),
    /// Permutation test between two AP reports.
    Sigtest(SigtestArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory (receives images/ and manifest.tsv).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated vocabulary; defaults to ten built-in words.
    #[arg(long, value_delimiter = ',')]
    words: Option<Vec<String>>,
    #[arg(long, default_value_t = 32)]
    height: usize,
    #[arg(long, default_value_t = 20)]
    train: usize,
    #[arg(long, default_value_t = 10)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    queries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Arch {
    PhocnetFull,
    PhocnetMini,
    Custom,
}

/// Overrides applied on top of `--config`; flags win.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    arch: Option<Arch>,
    /// spp or tpp.
    #[arg(long)]
    pooling: Option<String>,
    /// phoc, spoc or dctow.
    #[arg(long)]
    embedding: Option<String>,
    /// Pyramid levels, e.g. 2,3,4,5.
    #[arg(long)]
    levels: Option<String>,
    /// bce, cosine or euclidean.
    #[arg(long)]
    loss: Option<String>,
    /// sgd or adam; picks the matching default learning rate.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    iterations: Option<u64>,
    /// Evaluate QbS mAP on the test partition every N iterations.
    #[arg(long)]
    eval_every: Option<u64>,
    /// Enable random affine augmentation.
    #[arg(long)]
    augment: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Training trace; defaults to `<out>.trace.tsv`.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Continue from a checkpoint that carries optimizer state.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PartitionArg {
    Train,
    Test,
    Query,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// Embed transcriptions instead of images.
    #[arg(long)]
    strings: bool,
    /// Trained model; required for images, optional for strings.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    partition: Option<PartitionArg>,
    /// Comma-separated words to embed (string mode).
    #[arg(long, value_delimiter = ',')]
    words: Option<Vec<String>>,
    /// Alphabet as a string of symbols (string mode without checkpoint).
    #[arg(long)]
    alphabet: Option<String>,
    #[arg(long)]
    embedding: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Qbe,
    Qbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    Almazan,
    Competition,
}

#[derive(Debug, Args)]
struct SpotArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "almazan")]
    protocol: ProtocolArg,
    /// File with one stop word per line (QbS queries only); overrides the manifest list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// AP report; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ranked lists: `query  rank  item  distance` per line.
    #[arg(long)]
    ranked: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Directory for one AP report per protocol.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SidedArg {
    Two,
    Greater,
}

#[derive(Debug, Args)]
struct SigtestArgs {
    report_a: PathBuf,
    report_b: PathBuf,
    /// Number of permutations.
    #[arg(long, conflicts_with = "s_target")]
    k: Option<u64>,
    /// Target standard deviation of the p-value; sets k = ceil(1 / (4 s^2)).
    #[arg(long)]
    s_target: Option<f64>,
    #[arg(long, value_enum, default_value = "two")]
    sided: SidedArg,
    /// Swap APs query by query instead of pooling.
    #[arg(long)]
    paired: bool,
    /// Report (count + 1) / (k + 1).
    #[arg(long)]
    add_one: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Embed(a) => commands::embed(a),
        Command::Spot(a) => commands::spot(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sigtest(a) => commands::sigtest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
