//! Monte Carlo checks of the simulated fBm: covariance against the closed form
//! of the unnormalised kernel and the conditional residual variance against
//! `rho(u,v)`.
//!
//! `results.csv`: `hurst,check,u,v,estimate,expected,std_error,z`.

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sewkit::fbm::{mvn_variance_constant, rho};
use sewkit::{rng, stats, FbmParams, FbmSampler};

use crate::report::{row, Report, Verdict};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub hurst: Vec<f64>,
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    /// `(s,t)` pairs for `Cov(B_s, B_t)`.
    pub covariance_pairs: Vec<(f64, f64)>,
    /// `(u,v)` pairs for `Var(B_v - E_u B_v)`.
    pub residual_pairs: Vec<(f64, f64)>,
    /// Relative covariance tolerance, applied where the covariance is exact
    /// (`H = 1/2`).
    pub covariance_tol: f64,
    /// Largest admissible `|z|` for the residual variance.
    pub z_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            hurst: vec![0.25, 0.5, 0.75],
            paths: 100_000,
            steps: 16,
            horizon: 1.0,
            covariance_pairs: vec![(0.25, 0.25), (0.25, 0.5), (0.25, 1.0), (0.5, 0.75), (0.75, 1.0), (1.0, 1.0)],
            residual_pairs: vec![(0.25, 0.75), (0.5, 1.0)],
            covariance_tol: 0.02,
            z_tol: 3.0,
        }
    }
}

/// `Cov(B_s, B_t)` of the kernel without normalisation.
fn covariance(h: f64, s: f64, t: f64) -> f64 {
    0.5 * mvn_variance_constant(h) * (s.powf(2.0 * h) + t.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

pub fn run(p: &Params, seed: u64) -> Result<Report> {
    if p.paths < 2 {
        bail!("fbm-check needs at least two paths");
    }
    let mut report = Report::new(vec!["hurst", "check", "u", "v", "estimate", "expected", "std_error", "z"]);
    let (mut cov_worst, mut z_worst) = (0.0f64, 0.0f64);
    let mut per_h = Vec::new();
    for (k, &h) in p.hurst.iter().enumerate() {
        let sampler = FbmSampler::new(FbmParams::new(h, 1, p.horizon, p.steps))?;
        let stream = rng::derive(seed, &[k as u64]);
        // samples[path] = covariance products followed by residual squares
        let samples = (0..p.paths as u64)
            .into_par_iter()
            .map(|i| {
                let b = sampler.sample_member(stream, i);
                let mut out = Vec::with_capacity(p.covariance_pairs.len() + p.residual_pairs.len());
                for (s, t) in &p.covariance_pairs {
                    out.push(b.value_at(0, *s)? * b.value_at(0, *t)?);
                }
                for (u, v) in &p.residual_pairs {
                    let r = b.value_at(0, *v)? - b.conditional_mean(0, *u, *v)?;
                    out.push(r * r);
                }
                Ok(out)
            })
            .collect::<sewkit::Result<Vec<Vec<f64>>>>()?;
        let column = |j: usize| samples.iter().map(|s| s[j]).collect::<Vec<f64>>();
        let (mut h_cov, mut h_z) = (0.0f64, 0.0f64);
        for (j, (s, t)) in p.covariance_pairs.iter().enumerate() {
            let xs = column(j);
            let (est, se, exp) = (stats::mean(&xs), stats::std_error(&xs), covariance(h, *s, *t));
            let z = (est - exp) / se;
            if h == 0.5 {
                h_cov = h_cov.max((est - exp).abs() / exp.abs());
            }
            report.row(row![h, "covariance", s, t, est, exp, se, z]);
        }
        for (j, (u, v)) in p.residual_pairs.iter().enumerate() {
            let xs = column(p.covariance_pairs.len() + j);
            let (est, se, exp) = (stats::mean(&xs), stats::std_error(&xs), rho(h, *u, *v)?);
            let z = (est - exp) / se;
            h_z = h_z.max(z.abs());
            report.row(row![h, "residual_variance", u, v, est, exp, se, z]);
        }
        cov_worst = cov_worst.max(h_cov);
        z_worst = z_worst.max(h_z);
        per_h.push(json!({ "hurst": h, "max_covariance_rel_error_bm": if h == 0.5 { Some(h_cov) } else { None }, "max_residual_z": h_z }));
    }
    if p.hurst.contains(&0.5) && !p.covariance_pairs.is_empty() {
        report.verdicts.push(Verdict::new("bm_covariance", cov_worst <= p.covariance_tol, cov_worst, format!("max relative error <= {}", p.covariance_tol)));
    }
    if !p.residual_pairs.is_empty() {
        report.verdicts.push(Verdict::new("residual_variance", z_worst <= p.z_tol, z_worst, format!("max |z| <= {}", p.z_tol)));
    }
    report.results = json!({ "per_hurst": per_h, "paths": p.paths });
    Ok(report)
}
