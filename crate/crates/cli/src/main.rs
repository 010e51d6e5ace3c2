//! `spikeflag` command line: generate, preprocess, encode, train, eval,
//! sweep, infer and estimate.
//!
//! Exit status is 0 on success, 1 for runtime failures (including width
//! mismatches), 2 for configuration errors and 3 for I/O or file-format
//! errors. Failures print one diagnostic line to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikeflag::Error;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "spikeflag", version, about = "Spiking-network RFI flagging")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    pre: PreprocessFlags,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct PreprocessFlags {
    /// Scaling window as `a,b` standard deviations below and above the mean.
    #[arg(long, global = true, value_parser = parse_pair)]
    pub scale_sigmas: Option<(f64, f64)>,
    /// Divisive-normalisation kernel width.
    #[arg(long, global = true)]
    pub divnorm_k: Option<usize>,
    /// Keep negative divisive-normalisation output instead of clamping.
    #[arg(long, global = true)]
    pub no_clamp: bool,
    /// Skip divisive normalisation.
    #[arg(long, global = true)]
    pub no_divnorm: bool,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected a,b")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Args, Clone, Debug)]
pub struct Pick {
    /// Split to draw the spectrogram from.
    #[arg(long, default_value = "test", value_parser = ["train", "test"])]
    pub split: String,
    /// Index of the spectrogram within the split.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Generate,
    /// Write the scaled (and normalised) dataset the network sees.
    Preprocess {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Encode one spectrogram and draw its spike rasters.
    Encode {
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        pick: Pick,
        /// Also draw the first patch under every encoding method.
        #[arg(long)]
        all_methods: bool,
    },
    /// Train a network and write its checkpoint and loss history.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate on the test split and draw result panels.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Evaluates a freshly initialised network when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Spectrogram drawn in the panels.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Random hyper-parameter search.
    Sweep {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Flag a single spectrogram file.
    Infer {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// SFT1 values file of shape `[1, F, T]`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Chip count, power band and clock for neuromorphic deployment.
    Estimate {
        #[arg(long)]
        channels: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Io { .. }
        | Error::Json { .. }
        | Error::MalformedHeader { .. }
        | Error::UnsupportedVersion { .. }
        | Error::PayloadLength { .. }
        | Error::NonFinite { .. } => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> spikeflag::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let cfg = RunConfig::load(cli.config.as_deref())?.resolve(cli.seed, &cli.pre)?;
    let out = cli.out.as_path();
    match cli.cmd {
        Command::Generate => commands::generate(&cfg, out),
        Command::Preprocess { data } => commands::preprocess(&cfg, data, out),
        Command::Encode {
            data,
            pick,
            all_methods,
        } => commands::encode(&cfg, data, &pick, all_methods, out),
        Command::Train { data } => commands::train(&cfg, data, out),
        Command::Eval {
            data,
            checkpoint,
            index,
        } => commands::eval(&cfg, data, checkpoint, index, out),
        Command::Sweep { data } => commands::sweep(&cfg, data, out),
        Command::Infer { checkpoint, input } => commands::infer(&cfg, checkpoint, input, out),
        Command::Estimate { channels } => commands::estimate(&cfg, channels, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
