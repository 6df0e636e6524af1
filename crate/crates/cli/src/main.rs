mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use magdiff::NormKind;

/// Environment variable selecting the worker thread count.
pub const THREADS_ENV: &str = "MAGDIFF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "magdiff", version, about = "Covariate shift detection with activation-graph features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an MLP on IDX data and save it as a weight manifest.
    Train(TrainArgs),
    /// Build per-class mean graph summaries for one dense layer.
    Summaries(SummariesArgs),
    /// Test whether a candidate set is shifted relative to a clean set.
    /// Exit code 0: no shift detected, 2: shift detected, 1: error.
    Detect(DetectArgs),
    /// Corrupt an IDX image file with one of the built-in shifts.
    Shift(ShiftArgs),
    /// Run a power / type-I grid from a TOML config and write CSV and SVG.
    PowerGrid(PowerGridArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory with train/t10k IDX files.
    #[arg(long)]
    data: PathBuf,
    /// Layer widths, input first, e.g. 784-128-64-32-10.
    #[arg(long, default_value = "784-128-64-32-10")]
    arch: String,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Hidden-layer activation.
    #[arg(long, default_value = "relu")]
    hidden: String,
    /// Use only the first N training samples.
    #[arg(long)]
    train_limit: Option<usize>,
    /// Output directory for the manifest and blobs.
    #[arg(long, default_value = "model")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SummariesArgs {
    /// Weight manifest or its directory.
    #[arg(long)]
    model: PathBuf,
    /// Directory with train IDX files.
    #[arg(long)]
    data: PathBuf,
    /// Dense layer; negative values count from the output (-1 is the last).
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    layer: i64,
    #[arg(long, default_value_t = magdiff::actgraph::DEFAULT_SUBSET_SIZE)]
    subset_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "summaries.json")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeatureArg {
    Magdiff,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormArg {
    Frobenius,
    Spectral,
    SupOperator,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Frobenius => NormKind::Frobenius,
            NormArg::Spectral => NormKind::Spectral,
            NormArg::SupOperator => NormKind::SupOperator,
        }
    }
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Summary file; required for MAGDiff features.
    #[arg(long)]
    summaries: Option<PathBuf>,
    /// Clean samples: IDX images or a feature blob.
    #[arg(long)]
    clean: PathBuf,
    /// Candidate samples: IDX images or a feature blob.
    #[arg(long)]
    candidate: PathBuf,
    #[arg(long, value_enum, default_value_t = FeatureArg::Magdiff)]
    feature: FeatureArg,
    #[arg(long, value_enum, default_value_t = NormArg::Frobenius)]
    norm: NormArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Debug, Args)]
struct ShiftArgs {
    /// Input IDX image file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// gaussian_noise, gaussian_blur or image_shift (gn, gb, is).
    #[arg(long)]
    kind: String,
    /// Intensity level I..VI.
    #[arg(long)]
    level: String,
    /// Fraction of images to corrupt.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset whose built-in ladder is used.
    #[arg(long, default_value = "mnist")]
    dataset: String,
}

#[derive(Debug, Args)]
struct PowerGridArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => commands::train(a).map(|_| ExitCode::SUCCESS),
        Command::Summaries(a) => commands::summaries(a).map(|_| ExitCode::SUCCESS),
        Command::Detect(a) => commands::detect(a).map(|reject| {
            if reject {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }),
        Command::Shift(a) => commands::shift(a).map(|_| ExitCode::SUCCESS),
        Command::PowerGrid(a) => commands::power_grid(a).map(|_| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
