//! Generic sewing engine: Riemann sums of germs, sewn limits over `w`-dyadic
//! refinements, Doob–Meyer splitting, rate bounds and convergence studies.

pub mod allocation;
pub mod germ;
pub mod value;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{Control, Partition};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::stats;

pub use allocation::{allocate, allocation_identity, AllocationTerm};
pub use germ::{FbmSquareGerm, FnGerm, Germ, IncrementGerm, ItoGerm, NoiseGerm, TableGerm, YoungGerm, ZeroGerm};
pub use value::{lp_norm, Value, VecValue};

/// `sum_{[u,v] in pi} A_{u,v}`; the single-point partition gives `A_{t,t} = 0`.
pub fn riemann_sum<T: Scalar, G: Germ<T>>(g: &G, ctx: &G::Ctx, pi: &Partition<T>) -> Result<G::Output> {
    let mut intervals = pi.intervals();
    let Some((u, v)) = intervals.next() else {
        let t = pi.start();
        return Ok(g.eval(ctx, t, t)?.zero_like());
    };
    let mut acc = g.eval(ctx, u, v)?;
    for (u, v) in intervals {
        acc.acc_add(&g.eval(ctx, u, v)?);
    }
    Ok(acc)
}

/// One row of the Cauchy trace of a dyadic refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub level: u32,
    pub mesh_w: f64,
    pub value_norm: f64,
    /// `|A^{pi_h} - A^{pi_{h-1}}|`; absent at the first level.
    pub cauchy_diff: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SewResult<V> {
    /// Riemann sum at the finest level.
    pub value: V,
    pub trace: Vec<TraceRow>,
    /// Set when the Cauchy differences do not decrease with the level.
    pub non_decaying: bool,
}

/// Levels `first..=last` of the `w`-dyadic refinement of `[s,t]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Levels {
    pub first: u32,
    pub last: u32,
}

impl Levels {
    pub fn new(first: u32, last: u32) -> Result<Self> {
        if first > last {
            return invalid(format!("level range {first}..={last} is empty"));
        }
        Ok(Levels { first, last })
    }

    pub fn count(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> {
        self.first..=self.last
    }
}

/// Riemann sums along the dyadic refinement of `[s,t]` with their Cauchy
/// trace. Convergence is reported, not enforced.
pub fn sew<T: Scalar, G: Germ<T>>(
    g: &G,
    ctx: &G::Ctx,
    control: &Control<T>,
    s: T,
    t: T,
    levels: Levels,
) -> Result<SewResult<G::Output>> {
    let tree = control.dyadic_tree(s, t, levels.last)?;
    let mut trace = Vec::with_capacity(levels.count());
    let mut prev: Option<G::Output> = None;
    for h in levels.iter() {
        let pi = tree.partition(h);
        let sum = riemann_sum(g, ctx, &pi)?;
        let cauchy_diff = prev.as_ref().map(|p| sum.distance(p).as_f64());
        trace.push(TraceRow { level: h, mesh_w: control.mesh(&pi)?.as_f64(), value_norm: sum.norm().as_f64(), cauchy_diff });
        prev = Some(sum);
    }
    let non_decaying = trace_is_non_decaying(&trace);
    Ok(SewResult { value: prev.expect("at least one level"), trace, non_decaying })
}

/// A trace is flagged when the fitted slope of `log cauchy_diff` against the
/// level is not negative. Exactly vanishing differences count as decay.
pub fn trace_is_non_decaying(trace: &[TraceRow]) -> bool {
    let diffs: Vec<(f64, f64)> = trace.iter().filter_map(|r| r.cauchy_diff.map(|d| (r.level as f64, d))).collect();
    if diffs.len() < 2 || diffs.iter().all(|(_, d)| *d == 0.0) {
        return false;
    }
    if diffs.iter().any(|(_, d)| !d.is_finite()) {
        return true;
    }
    let floor = f64::MIN_POSITIVE;
    let xs: Vec<f64> = diffs.iter().map(|(h, _)| *h).collect();
    let ys: Vec<f64> = diffs.iter().map(|(_, d)| d.max(floor).ln()).collect();
    stats::least_squares(&xs, &ys).map(|f| f.slope >= 0.0).unwrap_or(false)
}

/// Writes a trace as CSV with columns `level,mesh_w,value_norm,cauchy_diff`.
pub fn write_trace_csv<W: Write>(mut out: W, trace: &[TraceRow]) -> Result<()> {
    writeln!(out, "level,mesh_w,value_norm,cauchy_diff")?;
    for r in trace {
        let diff = r.cauchy_diff.map(|d| format!("{d:e}")).unwrap_or_default();
        writeln!(out, "{},{:e},{:e},{}", r.level, r.mesh_w, r.value_norm, diff)?;
    }
    Ok(())
}

/// Martingale and compensator parts of a Riemann sum.
#[derive(Clone, Debug)]
pub struct DoobMeyer<V> {
    /// `M^pi = sum (A_{t_i,t_{i+1}} - E_{t_i} A_{t_i,t_{i+1}})`.
    pub m: V,
    /// `J^pi = sum E_{t_i} A_{t_i,t_{i+1}}`.
    pub j: V,
    pub riemann: V,
}

pub fn doob_meyer_sums<T: Scalar, G: Germ<T>>(g: &G, ctx: &G::Ctx, pi: &Partition<T>) -> Result<DoobMeyer<G::Output>> {
    let riemann = riemann_sum(g, ctx, pi)?;
    let mut j = riemann.zero_like();
    let mut m = riemann.zero_like();
    for (u, v) in pi.intervals() {
        let a = g.eval(ctx, u, v)?;
        let e = g.cond_mean(ctx, u, v)?;
        let mut centred = a;
        centred.acc_sub(&e);
        m.acc_add(&centred);
        j.acc_add(&e);
    }
    Ok(DoobMeyer { m, j, riemann })
}

/// Constants of the germ conditions: `|E_s delta A| <= Gamma1 w^{1+eps1}`,
/// `|delta A|_m <= Gamma2 w^{1/p_hat+eps2}`, and the `Gamma3, eps3` bound of
/// the Doob–Meyer conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GermBounds {
    pub gamma1: f64,
    pub eps1: f64,
    pub gamma2: f64,
    pub eps2: f64,
    pub gamma3: f64,
    pub eps3: f64,
    pub p_hat: f64,
    pub m: f64,
    pub n: f64,
}

impl GermBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gamma1", self.gamma1), ("gamma2", self.gamma2), ("gamma3", self.gamma3)] {
            if !(g >= 0.0) || !g.is_finite() {
                return invalid(format!("{name} must be finite and non-negative, got {g}"));
            }
        }
        for (name, e) in [("eps1", self.eps1), ("eps2", self.eps2), ("eps3", self.eps3)] {
            if !(e > 0.0) {
                return invalid(format!("{name} must be positive, got {e}"));
            }
        }
        if !(self.p_hat > 1.0 && self.p_hat <= 2.0) {
            return invalid(format!("p_hat must lie in (1, 2], got {}", self.p_hat));
        }
        if !(self.p_hat <= self.m && self.m <= self.n) {
            return invalid(format!("need p_hat <= m <= n, got {} {} {}", self.p_hat, self.m, self.n));
        }
        Ok(())
    }
}

/// `C Gamma1 mesh^{eps1} w + C Gamma2 mesh^{eps2} w^{1/p_hat}`.
pub fn rate_bound_w(b: &GermBounds, w_st: f64, mesh_w: f64, c: f64) -> Result<f64> {
    b.validate()?;
    if !(mesh_w >= 0.0) || mesh_w > w_st * (1.0 + 1e-12) {
        return invalid(format!("mesh {mesh_w} must lie in [0, w(s,t) = {w_st}]"));
    }
    Ok(c * b.gamma1 * mesh_w.powf(b.eps1) * w_st + c * b.gamma2 * mesh_w.powf(b.eps2) * w_st.powf(1.0 / b.p_hat))
}

/// [`rate_bound_w`] with `w(s,t)` taken from the control.
pub fn rate_bound<T: Scalar>(b: &GermBounds, control: &Control<T>, s: T, t: T, mesh_w: f64, c: f64) -> Result<f64> {
    rate_bound_w(b, control.eval(s, t)?.as_f64(), mesh_w, c)
}

/// Errors of dyadic Riemann sums against per-context references.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<u32>,
    pub mesh_w: Vec<f64>,
    /// RMS over contexts of `|A^{pi_h} - reference|`, per level.
    pub errors: Vec<f64>,
    /// `errors_by_context[c][k]` is the error of context `c` at `levels[k]`.
    pub errors_by_context: Vec<Vec<f64>>,
    /// Slope of `log error` against `log mesh_w`; `None` when fewer than two
    /// levels carry a positive error.
    pub slope: Option<f64>,
    /// Every error vanished: the Riemann sums are exact at all levels.
    pub degenerate_exact: bool,
}

impl ConvergenceStudy {
    /// Slope fitted over the levels `from..=to` only.
    pub fn slope_between(&self, from: u32, to: u32) -> Result<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .levels
            .iter()
            .zip(self.mesh_w.iter().zip(&self.errors))
            .filter(|(h, _)| **h >= from && **h <= to)
            .map(|(_, (m, e))| (*m, *e))
            .unzip();
        stats::loglog_slope(&xs, &ys)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "level,mesh_w,rms_error")?;
        for ((h, m), e) in self.levels.iter().zip(&self.mesh_w).zip(&self.errors) {
            writeln!(out, "{h},{m:e},{e:e}")?;
        }
        Ok(())
    }
}

/// Measures the empirical rate of the dyadic Riemann sums of `g` on `[s,t]`
/// over an ensemble of contexts. Contexts are processed in parallel and merged
/// by index, so the result does not depend on the thread count.
pub fn convergence_study<T, G, R>(
    g: &G,
    contexts: &[G::Ctx],
    control: &Control<T>,
    s: T,
    t: T,
    reference: R,
    levels: Levels,
) -> Result<ConvergenceStudy>
where
    T: Scalar,
    G: Germ<T> + Sync,
    G::Ctx: Sync + Sized,
    G::Output: Send,
    R: Fn(usize, &G::Ctx) -> Result<G::Output> + Sync,
{
    if levels.count() < 3 {
        return Err(Error::DegenerateFit(format!("convergence study needs at least 3 levels, got {}", levels.count())));
    }
    if contexts.is_empty() {
        return invalid("convergence study needs at least one context");
    }
    let tree = control.dyadic_tree(s, t, levels.last)?;
    let partitions: Vec<Partition<T>> = levels.iter().map(|h| tree.partition(h)).collect();
    let mesh_w = partitions.iter().map(|pi| control.mesh(pi).map(|m| m.as_f64())).collect::<Result<Vec<_>>>()?;
    let errors_by_context = contexts
        .par_iter()
        .enumerate()
        .map(|(i, ctx)| {
            let r = reference(i, ctx)?;
            partitions.iter().map(|pi| Ok(riemann_sum(g, ctx, pi)?.distance(&r).as_f64())).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = (0..partitions.len())
        .map(|k| stats::rms(&errors_by_context.iter().map(|e| e[k]).collect::<Vec<_>>()))
        .collect();
    let degenerate_exact = errors.iter().all(|e| *e == 0.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = mesh_w.iter().zip(&errors).filter(|(m, e)| **e > 0.0 && **m > 0.0).map(|(m, e)| (*m, *e)).unzip();
    let slope = if xs.len() >= 2 { stats::loglog_slope(&xs, &ys).ok() } else { None };
    Ok(ConvergenceStudy { levels: levels.iter().collect(), mesh_w, errors, errors_by_context, slope, degenerate_exact })
}

/// Sizes of the Riemann sums of a small germ `R` along the dyadic refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub levels: Vec<u32>,
    pub mesh_w: Vec<f64>,
    /// RMS over contexts of `|sum_{pi_h} R|`.
    pub sums: Vec<f64>,
    pub max: f64,
    /// Slope of `log sums` against `log mesh_w` (`None` when the sums vanish).
    pub slope: Option<f64>,
}

/// The Riemann sums of a germ whose increments are small enough must vanish in
/// the limit; this reports how fast they do.
pub fn uniqueness_probe<T, G>(r: &G, contexts: &[G::Ctx], control: &Control<T>, s: T, t: T, levels: Levels) -> Result<UniquenessReport>
where
    T: Scalar,
    G: Germ<T> + Sync,
    G::Ctx: Sync + Sized,
    G::Output: Send,
{
    if contexts.is_empty() {
        return invalid("uniqueness probe needs at least one context");
    }
    let tree = control.dyadic_tree(s, t, levels.last)?;
    let partitions: Vec<Partition<T>> = levels.iter().map(|h| tree.partition(h)).collect();
    let mesh_w = partitions.iter().map(|pi| control.mesh(pi).map(|m| m.as_f64())).collect::<Result<Vec<_>>>()?;
    let per_ctx = contexts
        .par_iter()
        .map(|ctx| partitions.iter().map(|pi| Ok(riemann_sum(r, ctx, pi)?.norm().as_f64())).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    let sums: Vec<f64> = (0..partitions.len()).map(|k| stats::rms(&per_ctx.iter().map(|e| e[k]).collect::<Vec<_>>())).collect();
    let max = sums.iter().fold(0.0f64, |m, v| m.max(*v));
    let (xs, ys): (Vec<f64>, Vec<f64>) = mesh_w.iter().zip(&sums).filter(|(m, e)| **e > 0.0 && **m > 0.0).map(|(m, e)| (*m, *e)).unzip();
    let slope = if xs.len() >= 2 { stats::loglog_slope(&xs, &ys).ok() } else { None };
    Ok(UniquenessReport { levels: levels.iter().collect(), mesh_w, sums, max, slope })
}
