//! JSON summaries and the artifact directory.
//!
//! Summary schema (`summary.json`):
//!
//! ```text
//! experiment   string   experiment id
//! seed         integer
//! pass         bool     every check passed and no numerical failure
//! failure      string?  numerical failure message, when the run stopped early
//! checks[]     name, measured, comparison ("le" | "ge" | "near"), expected,
//!              tolerance (only for "near"), tag, pass
//! notes[]      strings
//! artifacts[]  file names written next to the summary
//! ```
//!
//! Non-finite numbers are written as `null` and never pass.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// `measured <= expected`.
    Le,
    /// `measured >= expected`.
    Ge,
    /// `|measured - expected| <= tolerance`.
    Near,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub expected: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Where the expectation comes from: a property name.
    pub tag: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64, tag: &str) -> Self {
        let pass = measured <= bound;
        Self {
            name: name.into(),
            measured,
            comparison: Comparison::Le,
            expected: bound,
            tolerance: None,
            tag: tag.into(),
            pass,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64, tag: &str) -> Self {
        let pass = measured >= bound;
        Self {
            name: name.into(),
            measured,
            comparison: Comparison::Ge,
            expected: bound,
            tolerance: None,
            tag: tag.into(),
            pass,
        }
    }

    pub fn near(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64, tag: &str) -> Self {
        let pass = (measured - expected).abs() <= tolerance;
        Self {
            name: name.into(),
            measured,
            comparison: Comparison::Near,
            expected,
            tolerance: Some(tolerance),
            tag: tag.into(),
            pass,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool, tag: &str) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0, tag)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self { experiment: experiment.into(), seed, ..Default::default() }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn finish(&mut self) {
        self.pass = self.failure.is_none() && self.checks.iter().all(|c| c.pass);
    }

    pub fn exit_code(&self) -> u8 {
        match (&self.failure, self.pass) {
            (Some(_), _) => 3,
            (None, true) => 0,
            (None, false) => 1,
        }
    }
}

/// Output directory; records every file it writes.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Rows of displayable cells under `header`.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let bad =
            |e: csv::Error| CliError::Write { path: self.dir.join(name), source: std::io::Error::other(e.to_string()) };
        w.write_record(header).map_err(bad)?;
        for r in rows {
            w.write_record(r).map_err(bad)?;
        }
        let bytes =
            w.into_inner().map_err(|e| CliError::Write { path: self.dir.join(name), source: e.into_error() })?;
        self.write(name, &String::from_utf8_lossy(&bytes))
    }

    /// Writes `summary.json` listing every artifact, itself included.
    pub fn write_summary(&mut self, summary: &mut Summary) -> Result<(), CliError> {
        summary.finish();
        let mut names = self.written.clone();
        names.push("summary.json".into());
        names.sort();
        summary.artifacts = names;
        let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
        text.push('\n');
        self.write("summary.json", &text)
    }
}

/// Shortest round-trip representation; identical across runs.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
