//! Experiment harness: reads a configuration, runs one experiment, and
//! writes CSV tables, SVG plots and a JSON summary into the output directory.
//!
//! Exit codes: 0 all checks pass, 1 a check fails, 2 configuration or I/O
//! error, 3 numerical failure.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod report;

use std::path::{Path, PathBuf};

use config::{Config, Experiment};
use error::CliError;
use experiments::Run;
use report::{Artifacts, Summary};

/// Overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Runs `experiment` and returns its summary; the summary decides the exit
/// code unless an error is returned.
pub fn run(experiment: Experiment, config: &Path, overrides: &Overrides) -> Result<(Summary, PathBuf), CliError> {
    let text =
        std::fs::read_to_string(config).map_err(|source| CliError::Read { path: config.to_path_buf(), source })?;
    let cfg = Config::parse(&text, config, experiment)?;
    let seed = overrides.seed.unwrap_or(cfg.seed);
    let out =
        overrides.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| Path::new("out").join(experiment.id()));
    let mut art = Artifacts::create(&out)?;
    let mut summary = Summary::new(experiment.id(), seed);
    let mut r = Run { cfg: &cfg, seed, art: &mut art, summary: &mut summary };
    match experiment {
        Experiment::Minimize => experiments::minimize(&mut r)?,
        Experiment::VerifyConservation => experiments::verify_conservation(&mut r)?,
        Experiment::VerifyBoundaryLemma => experiments::verify_boundary_lemma(&mut r)?,
        Experiment::AreaChange => experiments::area_change(&mut r)?,
        Experiment::Jacobson => experiments::jacobson(&mut r)?,
        Experiment::VacuumScaling => experiments::vacuum_scaling(&mut r)?,
        Experiment::PowerCounting => experiments::power_counting(&mut r)?,
    }
    art.write_summary(&mut summary)?;
    Ok((summary, out))
}
