//! Spatial regularity of the functional of a fixed time horizon: Besov norms
//! of order `alpha + gamma` under grid refinement, for gammas on both sides of
//! the budget `gamma_max`.
//!
//! `results.csv`: `gamma,gamma_factor,grid_n,statistic`.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sewkit::functionals::{half_period_for, regularity_budget, regularity_probe, ProfileKind, ProfileSpec};
use sewkit::rng;

use super::ensemble;
use crate::plot::{Chart, Series};
use crate::report::{row, Report, Verdict};

/// Largest `|trend|` accepted as stable below `gamma_max`.
const STABLE_TOL: f64 = 0.08;
/// Smallest trend accepted as growth above `gamma_max`.
const GROWTH_MIN: f64 = 0.15;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub hurst: f64,
    pub dim: usize,
    pub profile: ProfileSpec,
    pub p: f64,
    pub q: f64,
    /// Probed gammas as multiples of `gamma_max`.
    pub gamma_factors: Vec<f64>,
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub grid_sizes: Vec<usize>,
    pub moment: f64,
    /// Fixed half-period; `null` takes it from the ensemble.
    pub half_period: Option<f64>,
    /// Quantile of `sup |B|` doubled into the half-period when it is `null`.
    pub half_period_quantile: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            hurst: 0.5,
            dim: 1,
            profile: ProfileSpec { theta: Some(2.0), ..ProfileSpec::new(ProfileKind::Dirac) },
            p: 2.0,
            q: 2.0,
            gamma_factors: vec![0.7, 1.3],
            paths: 32,
            steps: 1 << 16,
            horizon: 1.0,
            grid_sizes: vec![128, 256, 512],
            moment: 2.0,
            half_period: None,
            half_period_quantile: 1.0,
        }
    }
}

pub fn run(p: &Params, seed: u64) -> Result<Report> {
    if p.paths == 0 {
        bail!("regularity-probe needs at least one path");
    }
    let class = p.profile.class.unwrap_or_else(|| p.profile.default_class(p.dim));
    let theta = p.profile.theta.unwrap_or(f64::INFINITY);
    let budget = regularity_budget(p.hurst, p.dim, theta, class.alpha, p.p, p.q)?;
    if !budget.gamma_admissible {
        bail!("gamma_max = {} leaves nothing to probe", budget.gamma_max);
    }
    let gammas: Vec<f64> = p.gamma_factors.iter().map(|f| f * budget.gamma_max).collect();
    let paths = ensemble(p.hurst, p.dim, p.horizon, p.steps, p.paths, rng::derive(seed, &[1]))?;
    let half_period = p.half_period.unwrap_or_else(|| half_period_for(&paths, p.half_period_quantile));
    let r = regularity_probe(&p.profile, &paths, p.horizon, &gammas, p.p, p.q, &p.grid_sizes, half_period, p.moment)?;

    let mut report = Report::new(vec!["gamma", "gamma_factor", "grid_n", "statistic"]);
    let mut chart = Chart::new("Besov norm of the functional under grid refinement", "grid size n", "L^m norm of the Besov norm").log_log();
    for (g, (gamma, factor)) in gammas.iter().zip(&p.gamma_factors).enumerate() {
        for (k, n) in r.grid_sizes.iter().enumerate() {
            report.row(row![gamma, factor, n, r.stats[g][k]]);
        }
        let pts = r.grid_sizes.iter().map(|n| *n as f64).zip(r.stats[g].iter().copied()).collect();
        chart = chart.with(Series::new(format!("gamma = {factor} gamma_max"), pts));
        if *factor < 1.0 {
            report.verdicts.push(Verdict::new(format!("stable at {factor} gamma_max"), r.trend[g].abs() <= STABLE_TOL, r.trend[g], format!("|trend| <= {STABLE_TOL}")));
        } else if *factor > 1.0 {
            report.verdicts.push(Verdict::new(format!("grows at {factor} gamma_max"), r.trend[g] >= GROWTH_MIN, r.trend[g], format!(">= {GROWTH_MIN}")));
        }
    }
    report.plots.push(("norms.svg".into(), chart.to_svg()));
    report.results = json!({
        "budget": budget,
        "gamma_max": budget.gamma_max,
        "gammas": gammas,
        "half_period": half_period,
        "trend": r.trend,
        "growth": r.growth,
        "statistics": r.stats,
    });
    Ok(report)
}
