//! `hvc`: preprocess images, train the two-layer model, analyze and render it.
//!
//! Exit codes: 0 success, 1 I/O / load / usage failure, 2 degenerate data,
//! 3 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hvc_core::Error;

#[derive(Parser, Debug)]
#[command(name = "hvc", version, about = "Two-layer efficient visual coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert PGM/PPM images to normalized HVCR rasters.
    Preprocess(PreprocessArgs),
    /// Train the full model on preprocessed rasters.
    Train(TrainArgs),
    /// Gabor fits, spike-triggered covariance, RF maps or the cell taxonomy.
    Analyze(AnalyzeArgs),
    /// Write layer-1 filters as a PGM grid.
    Render(RenderArgs),
    /// Describe a model file or raster.
    Info(InfoArgs),
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    /// Directory of PGM/PPM images.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory for `.hvcr` rasters (created if missing).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Desk,
    Paper,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory of `.hvcr` rasters written by `preprocess`.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory for the model, curves and log.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Random seed; overrides any seed in the config file.
    #[arg(long, value_name = "U64")]
    seed: u64,
    /// Base parameter set; config file entries are applied on top.
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    /// `key = value` file overriding preset parameters.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write the log header and stop before training.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum What {
    Gabor,
    Stc,
    Rfmap,
    Classify,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StageArg {
    Spca2,
    Ica2,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Model file written by `train`.
    model: PathBuf,
    /// Analysis to run.
    #[arg(long, value_enum)]
    what: What,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Layer-2 stage whose units are analyzed [default: ica2 for classify, spca2 for stc and rfmap].
    #[arg(long, value_enum)]
    stage: Option<StageArg>,
    /// Single unit to analyze (stc, rfmap); all units when omitted.
    #[arg(long, value_name = "INDEX")]
    unit: Option<usize>,
    /// White-noise stimuli for stc.
    #[arg(long, value_name = "N", default_value_t = 20_000)]
    samples: usize,
    /// Seed of the stc stimuli.
    #[arg(long, value_name = "U64", default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Filters {
    /// Layer-1 sparse PCA columns.
    Spca1,
    /// Layer-1 sparse-coding features projected to pixels.
    Ica1,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Model file written by `train`.
    model: PathBuf,
    /// Filters to draw.
    #[arg(long, value_enum)]
    what: Filters,
    /// Output directory (created if missing); the grid is `<what>.pgm`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InfoArgs {
    /// Model (`HVC1`) or raster (`HVCR`) file.
    path: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Degenerate(_) => 2,
        Error::NonFinite(_) => 3,
        _ => 1,
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("HVC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("HVC_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a.data, &a.out),
        Command::Train(a) => commands::train(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Render(a) => commands::render(&a),
        Command::Info(a) => commands::info(&a.path),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hvc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
