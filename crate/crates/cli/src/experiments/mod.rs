mod besov_bench;
mod fbm_check;
mod functional_rate;
mod kolmogorov;
mod mtype;
mod occupation;
mod regularity;
mod sew_study;

use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sewkit::{FbmParams, FbmPath64, FbmSampler, GridSpec64};

use crate::config::{parse_params, Experiment, Run};
use crate::report::{write_report, write_resolved, Report};

/// Parses the parameters, records the resolved config, runs and writes every
/// artifact.
pub fn execute(run: &Run, params: Option<Value>) -> Result<Report> {
    match run.experiment {
        Experiment::SewStudy => go(run, params, sew_study::run),
        Experiment::FbmCheck => go(run, params, fbm_check::run),
        Experiment::FunctionalRate => go(run, params, functional_rate::run),
        Experiment::RegularityProbe => go(run, params, regularity::run),
        Experiment::Occupation => go(run, params, occupation::run),
        Experiment::Mtype => go(run, params, mtype::run),
        Experiment::Kolmogorov => go(run, params, kolmogorov::run),
        Experiment::BesovBench => go(run, params, besov_bench::run),
    }
}

fn go<P>(run: &Run, params: Option<Value>, f: fn(&P, u64) -> Result<Report>) -> Result<Report>
where
    P: for<'de> Deserialize<'de> + Serialize + Default,
{
    let p: P = parse_params(params)?;
    write_resolved(run, &p)?;
    let report = f(&p, run.seed)?;
    write_report(run, &report)?;
    Ok(report)
}

/// Periodic spatial grid `[-L, L)^dim` with `n` nodes per axis.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default = "one")]
    pub dim: usize,
    pub n: usize,
    pub half_period: f64,
}

impl GridParams {
    pub fn spec(&self) -> Result<GridSpec64> {
        Ok(GridSpec64::new(self.dim, self.half_period, self.n)?)
    }
}

fn one() -> usize {
    1
}

/// `n` fBm paths, member `i` drawn from stream `(seed, i)`.
pub fn ensemble(hurst: f64, dim: usize, horizon: f64, steps: usize, n: usize, seed: u64) -> Result<Vec<FbmPath64>> {
    let sampler = FbmSampler::new(FbmParams::new(hurst, dim, horizon, steps))?;
    Ok((0..n as u64).into_par_iter().map(|i| sampler.sample_member(seed, i)).collect())
}

/// Fails early when dyadic levels would leave the path grid.
pub fn check_levels_fit(last: u32, steps: usize) -> Result<()> {
    if !steps.is_power_of_two() || (1usize << last) > steps {
        anyhow::bail!("dyadic level {last} needs a power-of-two path grid with at least 2^{last} steps, got {steps}");
    }
    Ok(())
}
