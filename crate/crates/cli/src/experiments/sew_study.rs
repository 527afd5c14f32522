//! Convergence of dyadic Riemann sums for the built-in germs.
//!
//! `results.csv`: `level,mesh_w,rms_error`. `trace.csv` holds the Cauchy trace
//! of the first context: `level,mesh_w,value_norm,cauchy_diff`.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sewkit::control::{Control, ControlKind, Partition};
use sewkit::functionals::{functional_reference, FunctionalGerm, ProfileSpec};
use sewkit::sewing::{convergence_study, riemann_sum, sew, write_trace_csv, ConvergenceStudy, FbmSquareGerm, ItoGerm, TableGerm, YoungGerm, ZeroGerm};
use sewkit::{rng, stats, FbmPath64, Germ, Levels, SewResult};

use super::{check_levels_fit, ensemble, GridParams};
use crate::plot::{slope_guide, Chart, Series};
use crate::report::{row, Report, Verdict};

/// Relative size below which every error counts as rounding.
const EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GermChoice {
    /// `B_s (B_t - B_s)`.
    Ito {},
    /// `B_t^2 - B_s^2`.
    FbmSquare {},
    Zero {},
    /// `cos(a s) (g(t) - g(s))` with `g(t) = sin(b t) + t`.
    Young { a: f64, b: f64 },
    /// Additive functional of the path with the given profile.
    Functional { profile: ProfileSpec, grid: GridParams },
    /// `A_{t_i,t_j} = table[i][j]` over `points`.
    CustomTable { points: Vec<f64>, table: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub germ: GermChoice,
    pub hurst: f64,
    pub paths: usize,
    pub steps: usize,
    pub horizon: f64,
    pub levels: Levels,
    pub control: ControlKind<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Params { germ: GermChoice::Ito {}, hurst: 0.5, paths: 200, steps: 1024, horizon: 1.0, levels: Levels { first: 2, last: 10 }, control: ControlKind::Linear }
    }
}

impl Default for GermChoice {
    fn default() -> Self {
        GermChoice::Ito {}
    }
}

/// Outcome of one study, independent of the germ's value type.
struct Outcome {
    study: ConvergenceStudy,
    trace: Vec<sewkit::sewing::TraceRow>,
    non_decaying: bool,
    reference: &'static str,
    /// RMS size of the references, the scale for exactness.
    scale: f64,
    /// Three Monte Carlo standard errors of the reference, where meaningful.
    mc_bound: Option<f64>,
}

fn study<G>(g: &G, ctxs: &[G::Ctx], control: &Control<f64>, span: (f64, f64), levels: Levels, refs: &[G::Output], reference: &'static str) -> Result<Outcome>
where
    G: Germ<f64> + Sync,
    G::Ctx: Sync + Sized,
    G::Output: Send,
{
    use sewkit::Value;
    let study = convergence_study(g, ctxs, control, span.0, span.1, |i, _| Ok(refs[i].clone()), levels)?;
    let SewResult { trace, non_decaying, .. } = sew(g, &ctxs[0], control, span.0, span.1, levels)?;
    let scale = stats::rms(&refs.iter().map(|r| r.norm()).collect::<Vec<_>>());
    Ok(Outcome { study, trace, non_decaying, reference, scale, mc_bound: None })
}

fn path_refs<V: Send>(paths: &[FbmPath64], f: impl Fn(&FbmPath64) -> Result<V> + Sync + Send) -> Result<Vec<V>> {
    use rayon::prelude::*;
    paths.par_iter().map(f).collect()
}

/// `int_0^T cos(a t) (b cos(b t) + 1) dt`.
fn young_exact(a: f64, b: f64, t: f64) -> f64 {
    let s = |c: f64| if c == 0.0 { t } else { (c * t).sin() / c };
    0.5 * b * (s(a - b) + s(a + b)) + s(a)
}

pub fn run(p: &Params, seed: u64) -> Result<Report> {
    let control = Control::new(p.control.clone(), p.horizon)?;
    let span = (0.0, p.horizon);
    let needs_paths = matches!(p.germ, GermChoice::Ito {} | GermChoice::FbmSquare {} | GermChoice::Functional { .. });
    if needs_paths {
        if p.paths == 0 {
            bail!("sew-study needs at least one path");
        }
        if matches!(p.control, ControlKind::Linear) {
            check_levels_fit(p.levels.last, p.steps)?;
        }
    }
    let dim = match &p.germ {
        GermChoice::Functional { grid, .. } => grid.dim,
        _ => 1,
    };
    let paths = if needs_paths { ensemble(p.hurst, dim, p.horizon, p.steps, p.paths, rng::derive(seed, &[1]))? } else { Vec::new() };
    let (name, out) = match &p.germ {
        GermChoice::Ito {} => {
            let g = ItoGerm { coord: 0 };
            let (refs, reference) = if p.hurst == 0.5 {
                (path_refs(&paths, |b| Ok((b.value_at(0, p.horizon)?.powi(2) - p.horizon) / 2.0))?, "closed_form")
            } else {
                let grid = Partition::uniform(0.0, p.horizon, p.steps)?;
                (path_refs(&paths, |b| Ok(riemann_sum(&g, b, &grid)?))?, "path_grid")
            };
            let mut out = study(&g, &paths, &control, span, p.levels, &refs, reference)?;
            if refs.len() > 1 {
                out.mc_bound = Some(3.0 * stats::std_error(&refs));
            }
            ("ito", out)
        }
        GermChoice::FbmSquare {} => {
            let refs = path_refs(&paths, |b| Ok(b.value_at(0, p.horizon)?.powi(2)))?;
            ("fbm_square", study(&FbmSquareGerm { coord: 0 }, &paths, &control, span, p.levels, &refs, "closed_form")?)
        }
        GermChoice::Zero {} => ("zero", study(&ZeroGerm::<()>::new(), &[()], &control, span, p.levels, &[0.0], "closed_form")?),
        GermChoice::Young { a, b } => {
            let (a, b) = (*a, *b);
            let g = YoungGerm::new(move |t: f64| (a * t).cos(), move |t: f64| (b * t).sin() + t);
            ("young", study(&g, &[()], &control, span, p.levels, &[young_exact(a, b, p.horizon)], "closed_form")?)
        }
        GermChoice::Functional { profile, grid } => {
            let prof = profile.build(grid.spec()?)?;
            let refs = path_refs(&paths, |b| Ok(functional_reference(&prof, b, p.horizon, 1)?))?;
            ("functional", study(&FunctionalGerm::new(prof), &paths, &control, span, p.levels, &refs, "path_grid")?)
        }
        GermChoice::CustomTable { points, table } => {
            let g = TableGerm::new(points.clone(), table.clone())?;
            let all = Partition::new(points.clone())?;
            let refs = [riemann_sum(&g, &(), &all)?];
            ("custom_table", study(&g, &[()], &control, (all.start(), all.end()), p.levels, &refs, "table_points")?)
        }
    };

    let s = &out.study;
    if out.reference == "path_grid" && (1usize << p.levels.last) >= p.steps {
        eprintln!("note: level {} is the path grid itself, so the finest error vanishes and steepens the slope", p.levels.last);
    }
    let max_err = s.errors.iter().fold(0.0f64, |m, e| m.max(*e));
    let exact = s.degenerate_exact || max_err <= EXACT_TOL * (1.0 + out.scale);
    let slope = s.slope.unwrap_or(f64::NAN);
    let mut report = Report::new(vec!["level", "mesh_w", "rms_error"]);
    for ((h, m), e) in s.levels.iter().zip(&s.mesh_w).zip(&s.errors) {
        report.row(row![h, m, e]);
    }
    let mut trace = Vec::new();
    write_trace_csv(&mut trace, &out.trace)?;
    report.extra.push(("trace.csv".into(), trace));

    if exact {
        report.verdicts.push(Verdict::new("exact_sums", true, max_err, format!("max error <= {EXACT_TOL:e} x (1 + reference scale)")));
    } else {
        report.verdicts.push(Verdict::new("converges", slope > 0.0, slope, "log-log slope of error vs mesh_w > 0"));
        let last_diff = out.trace.last().and_then(|r| r.cauchy_diff).unwrap_or(f64::NAN);
        report.verdicts.push(Verdict::new("trace_decays", !out.non_decaying, last_diff, "Cauchy differences of the first context decrease"));
    }
    let mut expected = None;
    match &p.germ {
        GermChoice::Ito {} if p.hurst == 0.5 => {
            expected = Some(0.5);
            report.verdicts.push(Verdict::new("ito_rate", (slope - 0.5).abs() <= 0.15, slope, "0.5 +- 0.15"));
            if let (Some(bound), Some(&finest)) = (out.mc_bound, s.errors.last()) {
                report.verdicts.push(Verdict::new("ito_finest_error", finest <= bound, finest, format!("<= 3 MC standard errors = {bound:.4e}")));
            }
        }
        GermChoice::Young { .. } => {
            expected = Some(1.0);
            report.verdicts.push(Verdict::new("young_rate", slope >= 0.85, slope, ">= 0.85"));
        }
        _ => {}
    }

    let mut chart = Chart::new(format!("{name}: Riemann-sum error"), "mesh_w", "RMS error")
        .log_log()
        .with(Series::new("measured", s.mesh_w.iter().copied().zip(s.errors.iter().copied()).collect()));
    if let (Some(k), Some(&e)) = (expected, s.errors.first()) {
        chart = chart.with(slope_guide(format!("slope {k}"), &s.mesh_w, (s.mesh_w[0], e), k));
    }
    report.plots.push(("errors.svg".into(), chart.to_svg()));
    report.results = json!({
        "germ": name,
        "reference": out.reference,
        "slope": s.slope,
        "slope_report": if exact { "degenerate: exact".to_string() } else { format!("measured slope {slope:.4}") },
        "degenerate_exact": exact,
        "max_error": max_err,
        "levels": s.levels,
        "mesh_w": s.mesh_w,
        "rms_error": s.errors,
        "first_context_non_decaying": out.non_decaying,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sewkit::functionals::ProfileKind;

    #[test]
    fn young_closed_form_matches_the_acceptance_integral() {
        let exact = 5f64.sin() / 5.0 + 1f64.sin() + 3f64.sin() / 3.0;
        assert!((young_exact(3.0, 2.0, 1.0) - exact).abs() < 1e-15);
        // a = b and a = 0 use the limits
        assert!((young_exact(0.0, 0.0, 2.0) - 2.0).abs() < 1e-15);
        let t: f64 = 1.3;
        let direct = 0.5 * (t + (2.0 * t).sin() / 2.0) + t.sin();
        assert!((young_exact(1.0, 1.0, t) - direct).abs() < 1e-14);
    }

    #[test]
    fn zero_germ_is_exact() {
        let p = Params { germ: GermChoice::Zero {}, ..Params::default() };
        let r = run(&p, 1).unwrap();
        assert_eq!(r.results["slope_report"], "degenerate: exact");
    }

    #[test]
    fn germ_fields_are_checked() {
        assert!(serde_json::from_str::<GermChoice>(r#"{"name": "ito", "foo": 1}"#).is_err());
        assert!(serde_json::from_str::<GermChoice>(r#"{"name": "ito"}"#).is_ok());
    }

    #[test]
    fn default_profile_kind_parses() {
        let g: GermChoice = serde_json::from_str(r#"{"name": "functional", "profile": {"kind": "constant"}, "grid": {"n": 16, "half_period": 4.0}}"#).unwrap();
        match g {
            GermChoice::Functional { profile, .. } => assert_eq!(profile.kind, ProfileKind::Constant { value: 1.0 }),
            _ => panic!("wrong variant"),
        }
    }
}
