//! Martingale-type constants on coin trees: the sign martingale in `l^p`,
//! the Hilbert Pythagorean identity and the conditional Doob inequality.
//!
//! `results.csv`: `check,n,value` with checks `type_ratio` (at `p_hat`),
//! `type_ratio_compare` (at the comparison exponent) and `doob_min_c`.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sewkit::mtype::{SequenceKind, TreeMartingale, TreeSequence};
use sewkit::{rng, stats};

use crate::plot::{slope_guide, Chart, Series};
use crate::report::{row, Report, Verdict};

const EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Depths `1..=max_depth` of the sign martingale.
    pub max_depth: usize,
    /// Exponent of the `l^p` space the sign martingale lives in.
    pub p: f64,
    pub p_hat: f64,
    /// Type exponent above `p`; the ratio grows like `N^{1/p - 1/compare}`.
    pub compare_exponent: f64,
    pub m: f64,
    pub pythagoras: Pythagoras,
    pub doob: Doob,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pythagoras {
    pub depth: usize,
    pub dim: usize,
    pub decay: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Doob {
    /// Sequence lengths `N` (terms `y_0..y_N`).
    pub sizes: Vec<usize>,
    pub sequences: usize,
    pub ps: Vec<f64>,
    pub start: usize,
    pub g: usize,
    pub m: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params { max_depth: 16, p: 1.5, p_hat: 1.5, compare_exponent: 2.0, m: 2.0, pythagoras: Pythagoras::default(), doob: Doob::default() }
    }
}

impl Default for Pythagoras {
    fn default() -> Self {
        Pythagoras { depth: 12, dim: 4, decay: 0.2 }
    }
}

impl Default for Doob {
    fn default() -> Self {
        Doob { sizes: vec![4, 8, 12], sequences: 100, ps: vec![1.5, 2.0, 3.0], start: 2, g: 2, m: 2.0 }
    }
}

pub fn run(p: &Params, seed: u64) -> Result<Report> {
    if p.max_depth < 2 || p.doob.sizes.len() < 2 || p.doob.sequences == 0 || p.doob.ps.is_empty() {
        bail!("mtype needs max_depth >= 2, two or more Doob sizes, sequences and exponents");
    }
    let mut report = Report::new(vec!["check", "n", "value"]);
    let (mut ns, mut exact, mut compare) = (Vec::new(), Vec::new(), Vec::new());
    for n in 1..=p.max_depth {
        let f = TreeMartingale::sign(n, p.p)?;
        let r = f.type_ratio(p.p_hat, p.m)?;
        let c = f.type_ratio(p.compare_exponent, p.m)?;
        report.row(row!["type_ratio", n, r]);
        report.row(row!["type_ratio_compare", n, c]);
        ns.push(n as f64);
        exact.push(r);
        compare.push(c);
    }
    let exact_gap = exact.iter().fold(0.0f64, |a, r| a.max((r - 1.0).abs()));
    let slope = stats::loglog_slope(&ns, &compare)?;
    let predicted = 1.0 / p.p - 1.0 / p.compare_exponent;
    if p.p_hat == p.p {
        report.verdicts.push(Verdict::new("type ratio at p_hat = p is 1", exact_gap <= EXACT_TOL, exact_gap, format!("|ratio - 1| <= {EXACT_TOL:e}")));
    }
    report.verdicts.push(Verdict::new("comparison growth", (slope - predicted).abs() <= 0.05, slope, format!("{predicted:.4} +- 0.05")));

    let py = &p.pythagoras;
    let (a, b) = TreeMartingale::decaying(py.depth, py.dim, 2.0, py.decay, rng::derive(seed, &[1]))?.pythagorean_sides()?;
    let pyth = (a - b).abs() / b;
    report.verdicts.push(Verdict::new("Pythagorean identity", pyth <= EXACT_TOL, pyth, format!("relative gap <= {EXACT_TOL:e}")));

    let d = &p.doob;
    let kinds = [SequenceKind::Sign, SequenceKind::DriftNoise, SequenceKind::Decaying];
    let mut minima = Vec::new();
    for &n in &d.sizes {
        let mut worst = 0.0f64;
        for i in 0..d.sequences as u64 {
            let q = d.ps[((i / 3) as usize) % d.ps.len()];
            let seq = TreeSequence::generate(kinds[(i % 3) as usize], n + 1, d.start, 1 + (i % 4) as usize, q, rng::derive(seed, &[2, i]))?;
            let norm = if i % 2 == 0 { 2.0 } else { f64::INFINITY };
            worst = worst.max(seq.doob_ineq(q.min(2.0), d.m, norm, d.g, 1.0)?.min_c);
        }
        report.row(row!["doob_min_c", n, worst]);
        minima.push(worst);
    }
    let hi = minima.iter().fold(0.0f64, |a, c| a.max(*c));
    let lo = minima.iter().fold(f64::INFINITY, |a, c| a.min(*c));
    let doob_slope = stats::loglog_slope(&d.sizes.iter().map(|n| *n as f64).collect::<Vec<_>>(), &minima)?;
    report.verdicts.push(Verdict::new("Doob constant finite", minima.iter().all(|c| c.is_finite() && *c > 0.0), hi, "finite and positive"));
    report.verdicts.push(Verdict::new("Doob constant spread", hi / lo < 2.0, hi / lo, "max/min < 2"));
    report.verdicts.push(Verdict::new("Doob constant trend", doob_slope.abs() <= 0.1, doob_slope, "|log-log slope| <= 0.1"));

    let chart = Chart::new("Type ratio of the sign martingale", "depth N", "ratio")
        .log_log()
        .with(Series::new(format!("exponent {}", p.p_hat), ns.iter().copied().zip(exact.iter().copied()).collect()))
        .with(Series::new(format!("exponent {}", p.compare_exponent), ns.iter().copied().zip(compare.iter().copied()).collect()))
        .with(slope_guide(format!("slope {predicted:.3}"), &ns, (1.0, compare[0]), predicted));
    report.plots.push(("type_ratio.svg".into(), chart.to_svg()));
    report.results = json!({
        "type_ratio_max_gap": exact_gap,
        "comparison_slope": slope,
        "predicted_slope": predicted,
        "pythagorean_gap": pyth,
        "doob_min_c": minima,
        "doob_slope": doob_slope,
    });
    Ok(report)
}
