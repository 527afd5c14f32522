//! Occupation identity `<g, I[delta]_t> = int_0^t g(-B_r) dr` for a Gaussian
//! bump and, as a mass check, for `g = 1`, over refining partitions.
//!
//! `results.csv`: `cells,mean_bump_residual,max_bump_residual,max_constant_residual`.

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sewkit::functionals::{half_period_for, occupation_check};
use sewkit::{rng, stats, GridFunction64, GridSpec64, Partition64};

use super::ensemble;
use crate::plot::{Chart, Series};
use crate::report::{row, Report, Verdict};

const BUMP_TOL: f64 = 5e-2;
const MASS_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub hurst: f64,
    pub dim: usize,
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub grid_n: usize,
    pub sigma: f64,
    /// Partition sizes; each must divide `steps`.
    pub partition_cells: Vec<usize>,
    pub half_period: Option<f64>,
    pub half_period_quantile: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            hurst: 0.5,
            dim: 1,
            paths: 20,
            steps: 1 << 12,
            horizon: 1.0,
            grid_n: 512,
            sigma: 0.3,
            partition_cells: vec![256, 512, 1024, 2048, 4096],
            half_period: None,
            half_period_quantile: 1.0,
        }
    }
}

pub fn run(p: &Params, seed: u64) -> Result<Report> {
    if p.paths == 0 || p.partition_cells.is_empty() {
        bail!("occupation needs paths and at least one partition size");
    }
    if let Some(c) = p.partition_cells.iter().find(|c| **c == 0 || p.steps % **c != 0) {
        bail!("partition size {c} does not divide the {} path steps", p.steps);
    }
    let paths = ensemble(p.hurst, p.dim, p.horizon, p.steps, p.paths, rng::derive(seed, &[1]))?;
    let half_period = p.half_period.unwrap_or_else(|| half_period_for(&paths, p.half_period_quantile));
    let spec = GridSpec64::new(p.dim, half_period, p.grid_n)?;
    let bump = GridFunction64::gaussian_bump(spec, p.sigma, [0.0, 0.0]);
    let one = GridFunction64::constant(spec, 1.0);

    let mut report = Report::new(vec!["cells", "mean_bump_residual", "max_bump_residual", "max_constant_residual"]);
    let (mut mean_pts, mut max_pts) = (Vec::new(), Vec::new());
    let mut last = (0.0, 0.0);
    for &cells in &p.partition_cells {
        let pi = Partition64::uniform(0.0, p.horizon, cells)?;
        let res = paths
            .par_iter()
            .map(|b| Ok((occupation_check(b, &bump, p.horizon, &pi)?.residual, occupation_check(b, &one, p.horizon, &pi)?.residual)))
            .collect::<sewkit::Result<Vec<(f64, f64)>>>()?;
        let bumps: Vec<f64> = res.iter().map(|r| r.0).collect();
        let max_bump = bumps.iter().fold(0.0f64, |a, b| a.max(*b));
        let max_mass = res.iter().fold(0.0f64, |a, r| a.max(r.1));
        report.row(row![cells, stats::mean(&bumps), max_bump, max_mass]);
        mean_pts.push((cells as f64, stats::mean(&bumps)));
        max_pts.push((cells as f64, max_bump));
        last = (max_bump, max_mass);
    }
    report.verdicts.push(Verdict::new("bump residual at finest partition", last.0 < BUMP_TOL, last.0, format!("< {BUMP_TOL}")));
    report.verdicts.push(Verdict::new("mass conservation", last.1 < MASS_TOL, last.1, format!("< {MASS_TOL:e}")));
    let chart = Chart::new("Occupation identity residual", "partition cells", "relative residual")
        .log_log()
        .with(Series::new("mean over paths", mean_pts))
        .with(Series::new("max over paths", max_pts));
    report.plots.push(("residuals.svg".into(), chart.to_svg()));
    report.results = json!({ "half_period": half_period, "finest_max_bump_residual": last.0, "finest_max_constant_residual": last.1 });
    Ok(report)
}
