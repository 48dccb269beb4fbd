use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oops::commands::{self, Env};
use oops::error::CONFIG_ERROR;
use oops::{CliError, Outcome, RunConfig};

#[derive(Parser)]
#[command(name = "oops", version, about = "Incremental bias-optimal program search and its baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the task sequence with the incremental search.
    Oops,
    /// Levin search on each task independently.
    Lsearch,
    /// Levin search with weight updates after each solved task.
    Als,
    /// Draw programs by coin tossing and estimate an output prefix frequency.
    GuessSample,
    /// Runtime tail of sampled programs.
    SpeedTail,
    /// Run all programs interleaved and log their outputs.
    Dovetail,
    /// Check a stored program against the configured tasks.
    Verify,
    /// Print the instruction set.
    DumpIsa,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(w) = cli.workers {
        config.workers = w.max(1);
    }
    let mut stdout = std::io::stdout();
    let mut env = Env { config, out: cli.out.clone(), msg: &mut stdout };
    match cli.command {
        Command::Oops => commands::cmd_oops(&mut env),
        Command::Lsearch => commands::cmd_lsearch(&mut env),
        Command::Als => commands::cmd_als(&mut env),
        Command::GuessSample => commands::cmd_guess(&mut env),
        Command::SpeedTail => commands::cmd_speed_tail(&mut env),
        Command::Dovetail => commands::cmd_dovetail(&mut env),
        Command::Verify => commands::cmd_verify(&mut env),
        Command::DumpIsa => commands::cmd_dump_isa(&mut env),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => ExitCode::from(o.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR as u8)
        }
    }
}
