use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailgame::commands::{self, CommandContext};
use tailgame::config::SweepParameter;
use tailgame::error::Result;

#[derive(Parser)]
#[command(
    name = "tailgame",
    version,
    about = "Cooperative multi-predictor experiments on long-tail multi-label data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides out_dir in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn context(self) -> Result<CommandContext> {
        CommandContext::resolve(&self.config, self.seed, self.out)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train/val/test files and a manifest.
    Generate(CommonArgs),
    /// Train players and write checkpoint, diagnostics, and test metrics.
    Train(CommonArgs),
    /// Score a checkpoint on a sparse dataset.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint written by train.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sparse dataset file to score.
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare full training against its ablation variants.
    Ablate(CommonArgs),
    /// Train across a list of values for one hyperparameter.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Which hyperparameter to vary.
        #[arg(long)]
        parameter: SweepParameter,
        /// Comma-separated values to sweep over.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Print the label partition a config would train with.
    InspectPartition(CommonArgs),
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => commands::generate::run(&args.context()?),
        Command::Train(args) => commands::train::run(&args.context()?),
        Command::Eval { common, checkpoint, data } => {
            commands::eval::run(&common.context()?, &checkpoint, &data)
        }
        Command::Ablate(args) => commands::ablate::run(&args.context()?),
        Command::Sweep { common, parameter, values } => {
            commands::sweep::run(&common.context()?, parameter, &values)
        }
        Command::InspectPartition(args) => commands::inspect::run(&args.context()?),
    }
}

/// Dying quietly on a closed pipe (`tailgame ... | head`) instead of
/// panicking through the default ignored-SIGPIPE handler.
#[cfg(unix)]
fn restore_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn restore_sigpipe() {}

fn main() -> ExitCode {
    restore_sigpipe();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
