use std::path::PathBuf;
use std::process::ExitCode;

use assemblynet_cli::{cmd_board_verify, cmd_check, cmd_simulate, CommandOutcome, EXIT_USAGE, SEED_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "assemblynet",
    version,
    about = "Check, simulate and audit digital assemblies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest against the nine requirements.
    Check { file: PathBuf },
    /// Run a scenario and write its event log, timeline, board and summary.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = "assemblynet-out")]
        out: PathBuf,
        /// Overrides the scenario seed and ASSEMBLYNET_SEED.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify the hash chain of an exported board.
    BoardVerify { file: PathBuf },
}

/// Reads the environment seed, but only when `--seed` did not settle it.
fn env_seed(flag: Option<u64>) -> Result<Option<u64>, CommandOutcome> {
    if flag.is_some() {
        return Ok(None);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CommandOutcome {
            code: EXIT_USAGE,
            report: format!("{SEED_ENV}: `{v}` is not a seed"),
            artifacts: Vec::new(),
        }),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check { file } => cmd_check(&file),
        Command::Simulate { file, out, seed } => match env_seed(seed) {
            Ok(env) => cmd_simulate(&file, &out, seed, env),
            Err(o) => o,
        },
        Command::BoardVerify { file } => cmd_board_verify(&file),
    };
    if outcome.code == EXIT_USAGE {
        eprintln!("error: {}", outcome.report.trim_end());
    } else {
        print!("{}", outcome.report);
    }
    ExitCode::from(outcome.code as u8)
}
