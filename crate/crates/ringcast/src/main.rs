//! Thin command-line front over the library's batch commands.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ringcast::cli::{
    cmd_analyze, cmd_densify, cmd_report, cmd_simulate, cmd_synth, CliError, CliOptions,
};

#[derive(Parser)]
#[command(
    name = "ringcast",
    about = "Ring-highway trace analytics and broadcast dissemination simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario config file (flat `key = value` lines, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Per-key config override, repeatable: --set key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a probe trace: per-period summaries and distributions.
    Analyze,
    /// Estimate full-population flows per segment from a probe trace.
    Densify,
    /// Generate a synthetic full trace, a thinned probe trace and truth.
    Synth,
    /// Run the protocol scenario and write metric reports.
    Simulate,
    /// Merge per-seed reports in the output directory into a mean summary.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let opts = CliOptions {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        sets: cli.sets,
    };
    let result = match cli.command {
        Command::Analyze => cmd_analyze(&opts),
        Command::Densify => cmd_densify(&opts),
        Command::Synth => cmd_synth(&opts),
        Command::Simulate => cmd_simulate(&opts),
        Command::Report => cmd_report(&opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("usage error: {e}");
            ExitCode::from(1)
        }
        Err(e @ CliError::Input(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
