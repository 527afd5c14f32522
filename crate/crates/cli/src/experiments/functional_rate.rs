//! Convergence of the additive-functional Riemann sums to the path-grid
//! quadrature, per Hurst exponent.
//!
//! `results.csv`: `hurst,level,mesh_w,rms_error`.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sewkit::functionals::{functional_reference, regularity_budget, FunctionalGerm, ProfileKind, ProfileSpec};
use sewkit::sewing::convergence_study;
use sewkit::{rng, stats, Control, Levels, Value};

use super::{check_levels_fit, ensemble, GridParams};
use crate::plot::{Chart, Series};
use crate::report::{row, Report, Verdict};

/// Relative size below which every error counts as rounding.
const EXACT_TOL: f64 = 1e-12;
/// Allowed gap between the fitted slope and the fine-level slope, and between
/// the slope and the guaranteed exponent.
const SLOPE_TOL: f64 = 0.15;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub hurst: Vec<f64>,
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub levels: Levels,
    /// Levels used for the self-consistent fine-level slope.
    pub fine_levels: Levels,
    pub profile: ProfileSpec,
    pub grid: GridParams,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            hurst: vec![0.25, 0.5],
            paths: 500,
            steps: 1024,
            horizon: 1.0,
            levels: Levels { first: 2, last: 8 },
            fine_levels: Levels { first: 6, last: 8 },
            profile: ProfileSpec::new(ProfileKind::GaussianBump { sigma: 0.5, center: [0.0; 2] }),
            grid: GridParams { dim: 1, n: 128, half_period: 8.0 },
        }
    }
}

pub fn run(p: &Params, seed: u64) -> Result<Report> {
    check_levels_fit(p.levels.last, p.steps)?;
    let profile = p.profile.build(p.grid.spec()?)?;
    let germ = FunctionalGerm::new(profile.clone());
    let control = Control::linear(p.horizon)?;
    let mut report = Report::new(vec!["hurst", "level", "mesh_w", "rms_error"]);
    let mut chart = Chart::new(format!("{}: functional Riemann-sum error", profile.name()), "mesh_w", "RMS error").log_log();
    let mut configs = Vec::new();
    for (k, &h) in p.hurst.iter().enumerate() {
        let paths = ensemble(h, p.grid.dim, p.horizon, p.steps, p.paths, rng::derive(seed, &[k as u64]))?;
        let refs = paths.iter().map(|b| functional_reference(&profile, b, p.horizon, 1)).collect::<sewkit::Result<Vec<_>>>()?;
        let scale = stats::rms(&refs.iter().map(|r| r.norm()).collect::<Vec<_>>());
        let study = convergence_study(&germ, &paths, &control, 0.0, p.horizon, |i, _| Ok(refs[i].clone()), p.levels)?;
        for ((lvl, m), e) in study.levels.iter().zip(&study.mesh_w).zip(&study.errors) {
            report.row(row![h, lvl, m, e]);
        }
        chart = chart.with(Series::new(format!("H = {h}"), study.mesh_w.iter().copied().zip(study.errors.iter().copied()).collect()));
        let max_err = study.errors.iter().fold(0.0f64, |a, e| a.max(*e));
        let exact = study.degenerate_exact || max_err <= EXACT_TOL * (1.0 + scale);
        let class = profile.class();
        let budget = regularity_budget(h, p.grid.dim, profile.theta().unwrap_or(f64::INFINITY), class.alpha, class.p, class.q)?;
        // errors are measured in L^2 over the grid, so gamma = 0
        let guaranteed = budget.rate_exponent(0.0);
        let envelope = (guaranteed + 1.0 / budget.p_hat).min(1.0);
        if exact {
            report.verdicts.push(Verdict::new(format!("H={h}: exact"), true, max_err, "degenerate: exact"));
            configs.push(json!({ "hurst": h, "slope_report": "degenerate: exact", "max_error": max_err, "guaranteed": guaranteed, "envelope": envelope }));
            continue;
        }
        let slope = study.slope.unwrap_or(f64::NAN);
        let fine = study.slope_between(p.fine_levels.first, p.fine_levels.last).unwrap_or(f64::NAN);
        report.verdicts.push(Verdict::new(format!("H={h}: positive slope"), slope > 0.0, slope, "> 0"));
        report.verdicts.push(Verdict::new(format!("H={h}: fine-level consistency"), (slope - fine).abs() <= SLOPE_TOL, fine, format!("within {SLOPE_TOL} of slope {slope:.4}")));
        report.verdicts.push(Verdict::new(format!("H={h}: guaranteed rate"), slope >= guaranteed - SLOPE_TOL, slope, format!(">= {guaranteed:.4} - {SLOPE_TOL}")));
        configs.push(json!({
            "hurst": h,
            "slope_report": format!("measured slope {slope:.4}"),
            "slope": slope,
            "fine_slope": fine,
            "guaranteed": guaranteed,
            "envelope": envelope,
            "max_error": max_err,
        }));
    }
    report.plots.push(("errors.svg".into(), chart.to_svg()));
    report.results = json!({ "profile": profile.name(), "configurations": configs });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_is_flagged_exact() {
        let p = Params {
            hurst: vec![0.5],
            paths: 4,
            steps: 64,
            levels: Levels { first: 2, last: 6 },
            fine_levels: Levels { first: 4, last: 6 },
            profile: ProfileSpec::new(ProfileKind::Constant { value: 2.0 }),
            grid: GridParams { dim: 1, n: 16, half_period: 4.0 },
            ..Params::default()
        };
        let r = run(&p, 5).unwrap();
        assert_eq!(r.results["configurations"][0]["slope_report"], "degenerate: exact");
    }
}
