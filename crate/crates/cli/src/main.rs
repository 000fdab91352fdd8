mod commands;
mod config;
mod error;
mod score;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use eustwin::dataset::{FrequencyTag, DEFAULT_FOLD_SEED};

use crate::config::{PhantomKind, RunConfig};

/// Paired low/high-frequency ultrasound simulation and dataset tooling.
///
/// Log verbosity is read from `EUSTWIN_LOG` (error, warn, info, debug).
/// Exit status: 0 success, 2 config error, 3 data error.
#[derive(Debug, Parser)]
#[command(name = "eustwin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a paired low/high-frequency acquisition of a phantom.
    Simulate(SimulateArgs),
    /// Measure resolution, eSNR, CNR and SSNR of a simulated pair.
    Evaluate(EvaluateArgs),
    /// Cut a pair of images into overlapping patches.
    Patchify(PatchifyArgs),
    /// Reassemble one frequency of a pair from its patches.
    Reconstruct(ReconstructArgs),
    /// Assign items to cross-validation folds.
    Split(SplitArgs),
    /// Patch every pair of a directory and write a training manifest.
    Export(ExportArgs),
    /// Compare generated images against reference images.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML run configuration. Flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Prefix of every output file.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, value_enum)]
    pub phantom: Option<PhantomKind>,
    /// Phantom JSON; implies `--phantom file`.
    #[arg(long)]
    pub phantom_file: Option<PathBuf>,
    /// Scatterers per resolution cell.
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub dynamic_range_db: Option<f64>,
}

impl SimulateArgs {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = &self.out {
            config.out_dir = v.clone();
        }
        if let Some(v) = &self.id {
            config.id = v.clone();
        }
        if let Some(v) = self.phantom {
            config.phantom.kind = v;
        }
        if let Some(v) = &self.phantom_file {
            config.phantom.kind = PhantomKind::File;
            config.phantom.path = Some(v.clone());
        }
        if let Some(v) = self.density {
            config.phantom.density = v;
        }
        if let Some(v) = self.noise_sigma {
            config.noise_sigma = v;
        }
        if let Some(v) = self.dynamic_range_db {
            config.dynamic_range_db = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub id: String,
    /// Region file; defaults to `{id}_regions.json` in `--dir`.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Report path; defaults to `{id}_report.json` in `--dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed recorded in the report; defaults to the image metadata seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 256)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 180)]
    pub stride_w: usize,
    #[arg(long, default_value_t = 248)]
    pub stride_h: usize,
}

#[derive(Debug, Args)]
pub struct PatchifyArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub id: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FreqArg {
    Low,
    High,
    Gen,
}

impl From<FreqArg> for FrequencyTag {
    fn from(f: FreqArg) -> Self {
        match f {
            FreqArg::Low => FrequencyTag::Low,
            FreqArg::High => FrequencyTag::High,
            FreqArg::Gen => FrequencyTag::Generated,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Directory holding the patches.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub id: String,
    #[arg(long, value_enum)]
    pub freq: FreqArg,
    /// Output directory; the image is written as `{id}_{freq}.pgm`.
    #[arg(long)]
    pub out: PathBuf,
    /// Blend overlaps with linear feathering instead of the plain mean.
    #[arg(long)]
    pub feather: bool,
    #[arg(long, default_value_t = 436)]
    pub width: usize,
    #[arg(long, default_value_t = 1000)]
    pub height: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Number of items.
    #[arg(long)]
    pub count: Option<usize>,
    /// One group label per line; folds are stratified by group.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_FOLD_SEED)]
    pub seed: u64,
    /// Output path; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Directory of `{id}_low.pgm` / `{id}_high.pgm` pairs.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_FOLD_SEED)]
    pub fold_seed: u64,
    /// `id group` per line; folds are stratified by group.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Root seed recorded in the manifest.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Only score `*_{tag}.pgm` files of `--generated`, matched without the tag.
    #[arg(long)]
    pub gen_tag: Option<String>,
    /// Only score `*_{tag}.pgm` files of `--reference`, matched without the tag.
    #[arg(long)]
    pub ref_tag: Option<String>,
    /// Region file; adds CNR and SSNR of every image.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// Dynamic-range ceiling for PSNR and SSIM.
    #[arg(long, default_value_t = 255.0)]
    pub ceiling: f64,
    /// Use the reference image maximum as the PSNR peak.
    #[arg(long)]
    pub observed_max: bool,
    /// `global` or an odd window size.
    #[arg(long, default_value = "7")]
    pub ssim_window: String,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EUSTWIN_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Patchify(a) => commands::patchify_cmd(a),
        Command::Reconstruct(a) => commands::reconstruct_cmd(a),
        Command::Split(a) => commands::split(a),
        Command::Export(a) => commands::export(a),
        Command::Score(a) => score::score(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eustwin: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
