//! `linefield`: data generation, training, rendering, evaluation and
//! self-checks for the line-distance triplane reconstructor.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use linefield_core::Error;

use config::{RunConfig, SEED_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("self-check failed: {0} propert(ies) out of bounds")]
    Selfcheck(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration and arguments, 3 for data and files, 4 for
    /// numeric failures, 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Argument(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Selfcheck(_) => 4,
            CliError::Core(e) => match e {
                Error::Config(_) => 2,
                Error::Data(_) | Error::Ingest { .. } | Error::Io { .. } | Error::Format(_) => 3,
                Error::Intrinsics | Error::DegenerateRay(_) | Error::Geometry(_) => 3,
                Error::Numeric(_) => 4,
                Error::Dimension(_) | Error::Contract(_) => 1,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "linefield",
    version,
    about = "Few-view triplane reconstruction with line-distance attention bias"
)]
struct Cli {
    /// Worker threads; 1 is the bit-reproducible reference mode. Defaults
    /// to the number of available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON config file; every field has a default.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config field by dotted key, e.g. `--set model.layers=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let seed = std::env::var(SEED_ENV).ok();
        RunConfig::load(self.config.as_deref(), &self.set, seed.as_deref())
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic scenes in SRN layout under train/val/test.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train on the `train` split of the dataset.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Continue from `latest.ckpt` in the checkpoint directory.
        #[arg(long)]
        resume: bool,
        /// Print a progress line every this many steps.
        #[arg(long, default_value_t = 50)]
        log_every: u64,
    },
    /// Render views of one scene from a checkpoint.
    Render(commands::RenderArgs),
    /// Score held-out views of a split; writes per-view and summary CSVs.
    Eval(commands::EvalArgs),
    /// Geometry oracles, gradient checks, attention and compositing checks.
    Selfcheck {
        /// Smaller randomized sweeps.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.workers.unwrap_or(0);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: worker pool: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::GenData { config } => config.load().and_then(|c| commands::gen_data(&c)),
        Command::Train { config, resume, log_every } => config.load().and_then(|c| commands::train(&c, resume, log_every)),
        Command::Render(args) => commands::render(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Selfcheck { quick, seed } => commands::selfcheck(quick, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
