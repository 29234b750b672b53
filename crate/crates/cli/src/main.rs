//! `gbmseg` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "gbmseg", version, about = "Volumetric brain-tumor segmentation pipeline")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Worker threads (default: available parallelism, or `threads` from the config).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the DoG filter bank and write it as a directory of RVOL files.
    Filters(FiltersArgs),
    /// Normalize a case's channels and extract per-voxel features.
    Features(FeaturesArgs),
    /// Train the per-voxel classifier.
    Train(TrainArgs),
    /// Label every voxel of a feature file.
    Predict(PredictArgs),
    /// Dice scores of predicted label maps against references.
    Evaluate(EvaluateArgs),
    /// Histogram of Dice scores from a report.
    ReportHist(ReportHistArgs),
    /// Time FFT against direct convolution.
    BenchConv(BenchArgs),
    /// Write a synthetic multi-modal tumor phantom.
    Phantom(PhantomArgs),
}

#[derive(Args, Debug)]
pub struct FiltersArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Odd edge length of each cubic filter.
    #[arg(long)]
    pub support: Option<usize>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// Keep the analytic Gaussian normalization instead of unit discrete sums.
    #[arg(long)]
    pub no_zero_dc: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated channel files (`.nii` or RVOL); names come from file stems.
    #[arg(long, value_delimiter = ',', conflicts_with = "case", required_unless_present = "case")]
    pub channels: Option<Vec<PathBuf>>,
    /// Case manifest listing the channels.
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Filter-bank directory; the default bank is built when omitted.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// Storage type of the feature file (`f32` or `f64`).
    #[arg(long)]
    pub dtype: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of `<case>.feat` files.
    #[arg(long)]
    pub features_dir: PathBuf,
    /// Directory holding `<case>.lbl`/`.rvol`/`.nii`, `<case>/case.manifest` or a `case.manifest`.
    #[arg(long)]
    pub labels_dir: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to `paths.checkpoint` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Output label map (RVOL, u8).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional class-probability volume (RVOL, 5 channels).
    #[arg(long)]
    pub probabilities: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Directory of predicted `<case>.lbl` files.
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub ref_dir: PathBuf,
    /// Per-case report; the summary goes next to it as `<stem>.summary.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportHistArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Defaults to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 64)]
    pub image_size: usize,
    #[arg(long, default_value_t = 33)]
    pub kernel_size: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    pub skip_direct: bool,
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Edge length `N`, or `NXxNYxNZ`.
    #[arg(long, default_value = "64")]
    pub dims: String,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Defaults to `p<seed>`.
    #[arg(long)]
    pub case_id: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

impl Command {
    fn config_path(&self) -> Option<&PathBuf> {
        match self {
            Command::Filters(a) => a.config.as_ref(),
            Command::Features(a) => a.config.as_ref(),
            Command::Train(a) => a.config.as_ref(),
            _ => None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
