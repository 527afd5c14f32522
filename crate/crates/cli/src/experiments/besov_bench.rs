//! Littlewood-Paley sanity checks: heat decay of a plane wave, Bernstein
//! ratios across frequency scales and the smoothing gain of the heat
//! semigroup across grid sizes.
//!
//! `results.csv`: `check,x,value` with checks `heat` (x = kappa lambda^2),
//! `bernstein` (x = lambda) and `smoothing_gain` (x = grid size).

use std::f64::consts::PI;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sewkit::spectral::{bernstein_check, heat_decay_fit, pag_check, GridFunction, GridSpec, ModeSet};
use sewkit::{rng, stats};

use crate::plot::{Chart, Series};
use crate::report::{row, Report, Verdict};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub heat: Heat,
    pub bernstein: Bernstein,
    pub smoothing: Smoothing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Heat {
    /// Wave number of the plane wave on `[-pi, pi)`.
    pub k: i64,
    pub n: usize,
    pub kappas: Vec<f64>,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bernstein {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub trials: usize,
    pub derivatives: u32,
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Smoothing {
    pub members: usize,
    pub blocks: Vec<i32>,
    pub alpha: f64,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
    pub grid_sizes: Vec<usize>,
    pub kappas: Vec<f64>,
}

impl Default for Heat {
    fn default() -> Self {
        Heat { k: 5, n: 256, kappas: vec![0.001, 0.01, 0.02, 0.05], p: 2.0 }
    }
}

impl Default for Bernstein {
    fn default() -> Self {
        Bernstein { n: 4096, lambdas: vec![128.0, 256.0, 512.0, 1024.0], trials: 20, derivatives: 1, p: 2.0, q: 2.0 }
    }
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing {
            members: 8,
            blocks: (0..7).collect(),
            alpha: 0.5,
            gamma: 1.0,
            p: 2.0,
            q: 2.0,
            grid_sizes: vec![1 << 10, 1 << 11, 1 << 12],
            kappas: (0..13).map(|k| 1e-4 * 2f64.powi(k)).collect(),
        }
    }
}

impl Default for Params {
    fn default() -> Self {
        Params { heat: Heat::default(), bernstein: Bernstein::default(), smoothing: Smoothing::default() }
    }
}

pub fn run(p: &Params, seed: u64) -> Result<Report> {
    let mut report = Report::new(vec!["check", "x", "value"]);

    let h = &p.heat;
    let wave = GridFunction::plane_wave_mode(GridSpec::new(1, PI, h.n)?, [h.k, 0]);
    let heat = heat_decay_fit(&[wave], h.k as f64, &h.kappas, h.p)?;
    for (x, r) in heat.kappa_lambda_sq.iter().zip(&heat.ratios) {
        report.row(row!["heat", x, r]);
    }
    report.verdicts.push(Verdict::new("heat decay rate", (heat.c_hat - 0.5).abs() <= 1e-6, heat.c_hat, "0.5 +- 1e-6"));

    let b = &p.bernstein;
    let bspec = GridSpec::new(1, PI, b.n)?;
    let maxima = b
        .lambdas
        .iter()
        .map(|l| bernstein_check(bspec, *l, b.derivatives, b.p, b.q, b.trials, rng::derive(seed, &[1])).map(|r| r.max_ratio))
        .collect::<sewkit::Result<Vec<f64>>>()?;
    for (l, m) in b.lambdas.iter().zip(&maxima) {
        report.row(row!["bernstein", l, m]);
    }
    let b_slope = stats::loglog_slope(&b.lambdas, &maxima)?;
    report.verdicts.push(Verdict::new("Bernstein ratio stable under scaling", b_slope.abs() <= 0.05, b_slope, "|log-log trend| <= 0.05"));

    let s = &p.smoothing;
    let members: Vec<ModeSet> = (0..s.members as u64).map(|i| ModeSet::random_blocks(1, PI, &s.blocks, s.alpha, rng::derive(seed, &[2, i]))).collect();
    let mut sups = Vec::new();
    for &n in &s.grid_sizes {
        let spec = GridSpec::new(1, PI, n)?;
        let mut worst = 0.0f64;
        for m in &members {
            worst = worst.max(pag_check(&m.to_grid(spec)?, s.alpha, s.gamma, s.p, s.q, &s.kappas)?.sup_stat);
        }
        report.row(row!["smoothing_gain", n, worst]);
        sups.push(worst);
    }
    let spread = sups.iter().fold(0.0f64, |a, v| a.max(*v)) / sups.iter().fold(f64::INFINITY, |a, v| a.min(*v)) - 1.0;
    report.verdicts.push(Verdict::new("smoothing gain stable across grids", spread < 0.2, spread, "relative variation < 0.2"));

    let heat_chart = Chart::new("Heat decay of a plane wave", "kappa lambda^2", "|P_kappa g| / |g|").log_y().with(Series::new("measured", heat.kappa_lambda_sq.iter().copied().zip(heat.ratios.iter().copied()).collect()));
    let bern_chart = Chart::new("Bernstein ratio", "lambda", "max ratio").log_log().with(Series::new("max over trials", b.lambdas.iter().copied().zip(maxima.iter().copied()).collect()));
    report.plots.push(("heat.svg".into(), heat_chart.to_svg()));
    report.plots.push(("bernstein.svg".into(), bern_chart.to_svg()));
    report.results = json!({
        "heat_c_hat": heat.c_hat,
        "heat_big_c_hat": heat.big_c_hat,
        "bernstein_max_ratio": maxima,
        "bernstein_trend": b_slope,
        "smoothing_sup": sups,
        "smoothing_spread": spread,
    });
    Ok(report)
}
