use std::path::PathBuf;
use std::process::ExitCode;

use cfslab_cli::config::Experiment;
use cfslab_cli::{run, Overrides};
use clap::Parser;

/// Run one experiment and write its tables, plots and summary.
#[derive(Debug, Parser)]
#[command(name = "cfslab", version)]
struct Cli {
    experiment: Experiment,
    /// Configuration file (`key = value` lines with `[section]` headers).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the configuration's `out` or `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.experiment, &cli.config, &Overrides { seed: cli.seed, out: cli.out }) {
        Ok((summary, out)) => {
            for c in &summary.checks {
                println!(
                    "{} {} = {:e} ({:?} {:e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.comparison,
                    c.expected
                );
            }
            if let Some(f) = &summary.failure {
                println!("NUMERICAL FAILURE {f}");
            }
            println!("{} -> {}", summary.experiment, out.join("summary.json").display());
            ExitCode::from(summary.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
