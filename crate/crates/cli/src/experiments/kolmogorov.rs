//! Tails of the Kolmogorov modulus `M_beta` of fBm over the dyadic chaining
//! family, with the linear control on `[0, T]`.
//!
//! `results.csv`: `beta,level,median,q90,mean,lm_norm`.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sewkit::kolmogorov::tail_study;
use sewkit::{rng, Control, FbmParams, FbmSampler};

use crate::plot::{Chart, Series};
use crate::report::{Report, Verdict};

/// Largest `|trend|` (log2 per level) accepted as stable below the threshold.
const STABLE_TOL: f64 = 0.01;
/// Smallest trend accepted as growth above it.
const GROWTH_MIN: f64 = 0.01;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub hurst: f64,
    pub paths: usize,
    /// Finest dyadic level; the path grid has `2^depth` steps.
    pub depth: u32,
    pub horizon: f64,
    pub betas: Vec<f64>,
    pub levels: Vec<u32>,
    pub moment: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params { hurst: 0.5, paths: 500, depth: 12, horizon: 1.0, betas: vec![0.3, 0.45], levels: vec![8, 10, 12], moment: 8.0 }
    }
}

pub fn run(p: &Params, seed: u64) -> Result<Report> {
    if p.depth > 24 {
        bail!("depth {} exceeds the supported 24 levels", p.depth);
    }
    let sampler = FbmSampler::new(FbmParams::new(p.hurst, 1, p.horizon, 1usize << p.depth))?;
    let control = Control::linear(p.horizon)?;
    let tree = control.dyadic_tree(0.0, p.horizon, p.depth)?;
    let pts = tree.level(p.depth).to_vec();
    let stream = rng::derive(seed, &[1]);
    let sample = |i: usize| -> sewkit::Result<Vec<f64>> {
        let b = sampler.sample_member(stream, i as u64);
        pts.iter().map(|t| b.value_at(0, *t)).collect()
    };
    let rep = tail_study(p.paths, sample, &tree, &control, &p.betas, &p.levels, p.moment)?;
    let threshold = p.hurst - 1.0 / p.moment;

    let mut report = Report::new(vec!["beta", "level", "median", "q90", "mean", "lm_norm"]);
    let mut chart = Chart::new("Kolmogorov modulus: L^m norm per level", "level", "L^m norm").log_y();
    for (b, beta) in rep.betas.iter().enumerate() {
        for (l, level) in rep.levels.iter().enumerate() {
            report.row(crate::report::row![beta, level, rep.median[b][l], rep.q90[b][l], rep.mean[b][l], rep.lm_norm[b][l]]);
        }
        chart = chart.with(Series::new(format!("beta = {beta}"), rep.levels.iter().map(|l| *l as f64).zip(rep.lm_norm[b].iter().copied()).collect()));
        let trend = rep.trend[b];
        if *beta < threshold {
            report.verdicts.push(Verdict::new(format!("stable at beta={beta}"), trend.abs() <= STABLE_TOL, trend, format!("|trend| <= {STABLE_TOL}")));
        } else if *beta > threshold {
            report.verdicts.push(Verdict::new(format!("grows at beta={beta}"), trend > GROWTH_MIN, trend, format!("> {GROWTH_MIN}")));
        }
    }
    report.plots.push(("modulus.svg".into(), chart.to_svg()));
    report.results = json!({ "threshold_beta": threshold, "trend": rep.trend, "lm_norm": rep.lm_norm });
    Ok(report)
}
