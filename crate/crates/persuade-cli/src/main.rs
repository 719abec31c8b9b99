use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use persuade_cli::commands::{self, Context};
use persuade_cli::config::ExperimentConfig;
use persuade_cli::error::CliError;
use persuade_cli::formats::OutputPaths;

/// Bayesian-persuasion ad auction experiment pipeline.
///
/// Exit codes: 0 ok, 2 config error, 3 missing input, 4 verification
/// failure.
#[derive(Parser)]
#[command(name = "persuade", version, about)]
struct Cli {
    /// Experiment config file.
    #[arg(long, global = true, default_value = "experiment.json")]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Thread budget for grid-search training (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the advertiser population and auction instances.
    Generate,
    /// Simulate bids and settle auctions under a named policy, writing the
    /// dataset and the hash-chained ledger.
    Simulate {
        /// Policy name from the config's `policies` map.
        #[arg(long, default_value = "exploration")]
        policy: String,
    },
    /// Split the dataset, grid-search the bid predictor, and write the
    /// trained model with its metrics.
    Train,
    /// Search signaling policies against the trained predictor and write
    /// the revenue report.
    Optimize,
    /// Verify a ledger file: hash chain plus outcome replay.
    Verify {
        /// Ledger path (defaults to `<out>/ledger.jsonl`).
        ledger: Option<PathBuf>,
    },
    /// Assemble the run manifest from the artifacts present.
    Report,
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe (head, grep) closes early instead
    // of panicking on the next print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    // Ledger verification against an explicit path needs no config at all.
    if let Command::Verify { ledger: Some(path) } = &cli.command {
        return commands::cmd_verify(path);
    }

    let mut config = ExperimentConfig::load(&cli.config).map_err(promote_missing_config)?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let experiment = config.validate()?;
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&experiment.config.output_dir));

    match cli.command {
        Command::Generate => commands::cmd_generate(&Context::new(experiment, out, cli.threads)),
        Command::Simulate { policy } => {
            commands::cmd_simulate(&Context::new(experiment, out, cli.threads), &policy)
        }
        Command::Train => commands::cmd_train(&Context::new(experiment, out, cli.threads)),
        Command::Optimize => commands::cmd_optimize(&Context::new(experiment, out, cli.threads)),
        Command::Verify { ledger } => {
            let path = ledger.unwrap_or_else(|| OutputPaths::new(&out).ledger());
            commands::cmd_verify(&path)
        }
        Command::Report => commands::cmd_report(&Context::new(experiment, out, cli.threads)),
    }
}

/// A missing config file is a config error (exit 2), not a missing pipeline
/// input (exit 3).
fn promote_missing_config(error: CliError) -> CliError {
    match error {
        CliError::MissingInput(path) => {
            CliError::config(path.display().to_string(), "config file not found")
        }
        other => other,
    }
}
