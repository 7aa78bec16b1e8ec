use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curriculum_lab_cli::commands::{cmd_counterexample, cmd_race, cmd_sweep, cmd_verify};
use curriculum_lab_cli::config::{ExperimentConfig, Format, Overrides};
use curriculum_lab_cli::{CliError, EXIT_USAGE};

/// Convergence-rate laboratory for curriculum-ordered SGD.
#[derive(Debug, Parser)]
#[command(name = "curriculum-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file; every field has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; all outputs are identical for any value.
    #[arg(long, global = true, env = "CURRICULUM_LAB_JOBS")]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the verification suite and write verify.json.
    Verify,
    /// Tabulate Monte Carlo and closed-form rates over the score grids.
    Sweep,
    /// Race ordering policies on finite pools.
    Race,
    /// Build the configured counterexample and write counterexample.json.
    Counterexample,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    }
    let overrides = Overrides { seed: cli.seed, out: cli.out, format: cli.format };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Verify => cmd_verify(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Race => cmd_race(&cfg),
        Command::Counterexample => cmd_counterexample(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
