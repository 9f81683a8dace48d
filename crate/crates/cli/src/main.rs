//! `hfsdiff`: simulate acquisitions, train score models, reconstruct and
//! benchmark from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hfsdiff::diffusion::Variant;
use hfsdiff::manifest::RunManifest;

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "hfsdiff", version, about = "High-frequency-subspace diffusion for undersampled MR reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

/// Flags shared by every subcommand. They override the `--config` file.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub variant: Option<Variant>,
    /// Predictor steps N.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Corrector sub-steps M per predictor step.
    #[arg(long, global = true)]
    pub correctors: Option<usize>,
    /// Width of the undiffused low-frequency band.
    #[arg(long, global = true)]
    pub nl: Option<usize>,
    /// Nominal undersampling factor.
    #[arg(long, global = true)]
    pub factor: Option<f64>,
    /// Fully sampled center lines.
    #[arg(long, global = true)]
    pub acs: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda1: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda2: Option<f64>,
    /// Corrector signal-to-noise ratio.
    #[arg(long = "snr-r", global = true, allow_negative_numbers = true)]
    pub snr_r: Option<f64>,
    /// Disable the data-consistency terms.
    #[arg(long = "no-dc", global = true)]
    pub no_dc: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Gaussian,
    Denoiser,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a normalized test image.
    Phantom {
        /// shepp_logan, gaussian_blobs, lowfreq_only[:n], flat_regions
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
    },
    /// Generate coil sensitivity maps.
    Csm {
        #[arg(long)]
        coils: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
    },
    /// Generate an undersampling mask and report its acceleration.
    Mask {
        /// uniform or gaussian_density
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
    },
    /// Simulate a noisy multicoil acquisition into a dataset folder.
    Acquire {
        /// Phantom kind, as for `phantom`.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        coils: Option<usize>,
        /// Per-component k-space noise standard deviation.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        mask: Option<String>,
    },
    /// Fit a Gaussian prior or train a denoiser on generated images.
    Train {
        #[arg(long, value_enum, default_value = "gaussian")]
        model: ModelKind,
        /// Training-image kind, as for `phantom`.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Reconstruct a dataset with a trained model.
    Reconstruct {
        /// Dataset folder written by `acquire`.
        #[arg(long)]
        data: PathBuf,
        /// Model folder written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Keep an iterate every this many steps.
        #[arg(long, default_value_t = 0)]
        snapshot_every: usize,
    },
    /// NMSE against step count for several variants.
    Sweep {
        /// Comma-separated step counts.
        #[arg(long, value_delimiter = ',')]
        steps_list: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
        #[arg(long)]
        chains: Option<usize>,
        /// Use this dataset instead of the Gaussian testbed.
        #[arg(long, requires = "model")]
        data: Option<PathBuf>,
        /// Model folders for `--data` (repeatable).
        #[arg(long)]
        model: Vec<PathBuf>,
    },
    /// Reconstruction quality against the low-band width.
    #[command(name = "ablate-nl")]
    AblateNl {
        #[arg(long, value_delimiter = ',')]
        nl_list: Option<Vec<usize>>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long, requires = "model")]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Vec<PathBuf>,
    },
    /// NMSE, PSNR and SSIM of an image against a reference.
    Metrics {
        /// `.cfl` file (or its base name) of the estimate.
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Wall-clock time of reconstructions at several step counts.
    Timing {
        #[arg(long, value_delimiter = ',', default_value = "100,1000")]
        steps_list: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, requires = "model")]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Phantom { .. } => "phantom",
            Command::Csm { .. } => "csm",
            Command::Mask { .. } => "mask",
            Command::Acquire { .. } => "acquire",
            Command::Train { .. } => "train",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Sweep { .. } => "sweep",
            Command::AblateNl { .. } => "ablate-nl",
            Command::Metrics { .. } => "metrics",
            Command::Timing { .. } => "timing",
        }
    }
}

fn exit_code(e: &hfsdiff::Error) -> u8 {
    if e.is_divergence() {
        EXIT_DIVERGENCE
    } else if e.is_io() {
        EXIT_IO
    } else {
        EXIT_CONFIG
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut manifest = RunManifest::new(cli.command.name(), serde_json::json!({ "argv": argv }));
    match commands::run(&cli, &mut manifest) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if !manifest.params.is_object() {
                manifest.params = serde_json::json!({});
            }
            manifest.params["error"] = e.to_string().into();
            if let Err(w) = manifest.write(&cli.common.out) {
                eprintln!("error: could not write the manifest: {w}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
