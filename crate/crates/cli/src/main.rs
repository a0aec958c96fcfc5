//! `spkadapt`: feature extraction, training, adaptation and evaluation for
//! child/adult speaker classification across domains.

mod commands;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "spkadapt", version, about = "Child/adult speaker classification with domain adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdaptVariant {
    Gan,
    Gr,
}

impl From<AdaptVariant> for spkadapt::model::Variant {
    fn from(v: AdaptVariant) -> Self {
        match v {
            AdaptVariant::Gan => spkadapt::model::Variant::Gan,
            AdaptVariant::Gr => spkadapt::model::Variant::Gr,
        }
    }
}

/// Manifest, experiment spec and overrides shared by the training commands.
#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Experiment spec (TOML). Without it every manifest domain tag other than
    /// `target` is treated as source.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute raw MFCC features for every waveform session of a manifest.
    Featurize {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Write a synthetic two-domain corpus with a manifest and experiment spec.
    Synth {
        /// Synthetic corpus spec (TOML); defaults to the built-in design.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Supervised training on labeled source sessions.
    Pretrain {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Adversarial adaptation of a pre-trained checkpoint to unlabeled target sessions.
    Adapt {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_enum)]
        variant: Option<AdaptVariant>,
        /// Pre-trained checkpoint; defaults to `<out>/pretrain.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Supervised training on source plus labeled target training sessions.
    Upperbound {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Score a checkpoint or a predictions file on the target test sessions.
    Evaluate {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Output file stem; defaults to the input file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Score fusion and embedding fusion of a GAN and a GR checkpoint.
    Fuse {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Defaults to `<out>/gan.ckpt`.
        #[arg(long)]
        gan: Option<PathBuf>,
        /// Defaults to `<out>/gr.ckpt`.
        #[arg(long)]
        gr: Option<PathBuf>,
    },
    /// Write generator embeddings of every session in the manifest.
    ExportEmbeddings {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
}

pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e);
            EXIT_RUNTIME
        }
    }
}

fn main() {
    env_logger::Builder::new().filter_level(log::LevelFilter::Info).init();
    std::process::exit(run(std::env::args_os()));
}
