use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_SEED: u64 = 20240617;
pub const DEFAULT_OUT: &str = "out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SewStudy,
    FbmCheck,
    FunctionalRate,
    RegularityProbe,
    Occupation,
    Mtype,
    Kolmogorov,
    BesovBench,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SewStudy => "sew-study",
            Experiment::FbmCheck => "fbm-check",
            Experiment::FunctionalRate => "functional-rate",
            Experiment::RegularityProbe => "regularity-probe",
            Experiment::Occupation => "occupation",
            Experiment::Mtype => "mtype",
            Experiment::Kolmogorov => "kolmogorov",
            Experiment::BesovBench => "besov-bench",
        }
    }
}

/// Top level of a config file. `params` is checked against the schema of the
/// chosen experiment once the experiment is known.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: Option<Value>,
}

impl RawConfig {
    pub fn load(path: &Path, experiment: Experiment) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let raw: RawConfig = serde_json::from_str(&text).with_context(|| format!("schema error in {}", path.display()))?;
        if let Some(e) = raw.experiment {
            if e != experiment {
                bail!("schema error in {}: config is for `{}` but `{}` was requested", path.display(), e.name(), experiment.name());
            }
        }
        Ok(raw)
    }
}

/// Settings resolved from the command line, environment and config.
#[derive(Clone, Debug)]
pub struct Run {
    pub experiment: Experiment,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
}

/// Parses the experiment parameters, filling every default.
pub fn parse_params<P: for<'de> Deserialize<'de> + Default>(params: Option<Value>) -> Result<P> {
    match params {
        None => Ok(P::default()),
        Some(v) => serde_json::from_value(v).context("schema error in `params`"),
    }
}
