//! Controls on the simplex `{0 <= s <= t <= T}`, control-adapted midpoints and
//! dyadic points, partitions and their control mesh.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::scalar::Scalar;

/// Deepest dyadic level built unless the caller raises it.
pub const DEFAULT_MAX_LEVEL: u32 = 24;

/// Relative superadditivity slack for closed-form kinds.
pub const CLOSED_FORM_TOL: f64 = 1e-12;
/// Relative superadditivity slack for tabulated controls.
pub const TABULATED_TOL: f64 = 1e-9;

/// Serialisable description of a control. `theta: None` encodes `theta = inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound = "T: Scalar")]
pub enum ControlKind<T> {
    /// `w(s,t) = t - s`.
    Linear,
    /// `w(s,t) = scale * (t - s)^kappa`, `kappa >= 1`.
    Power { scale: T, kappa: T },
    /// Control built from a piecewise-constant profile of spatial norms
    /// `|f_r|` on uniform cells of `[0,T]`:
    /// `w^{1-H gamma} = (int_s^t |f_r|^theta dr)^{1/theta} (t-s)^{1-H gamma-1/theta}`.
    /// With `theta = inf` the integral becomes a supremum, which jumps at cell
    /// boundaries unless the profile is constant; w-midpoints then need not
    /// balance the two halves.
    BesovData { profile: Vec<T>, theta: Option<T>, hurst: T, gamma: T },
    /// Values on the uniform grid `k T / n`, `values[i][j] = w(t_i, t_j)` for
    /// `i <= j`; piecewise-linear on the triangulated grid in between.
    Tabulated { values: Vec<Vec<T>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ControlSpec<T> {
    horizon: T,
    #[serde(flatten)]
    kind: ControlKind<T>,
}

/// A superadditive continuous control on `[0, horizon]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ControlSpec<T>", into = "ControlSpec<T>")]
#[serde(bound = "T: Scalar")]
pub struct Control<T: Scalar> {
    kind: ControlKind<T>,
    horizon: T,
    /// Cumulative `int_0^{t_k} |f|^theta` for the besov kind.
    cumulative: Option<Arc<Vec<T>>>,
}

impl<T: Scalar> PartialEq for Control<T> {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.horizon == other.horizon
    }
}

impl<T: Scalar> TryFrom<ControlSpec<T>> for Control<T> {
    type Error = Error;
    fn try_from(spec: ControlSpec<T>) -> Result<Self> {
        Control::new(spec.kind, spec.horizon)
    }
}

impl<T: Scalar> From<Control<T>> for ControlSpec<T> {
    fn from(c: Control<T>) -> Self {
        ControlSpec { horizon: c.horizon, kind: c.kind }
    }
}

/// Outcome of an exhaustive superadditivity scan.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperadditivityReport<T> {
    /// `max (w(s,u) + w(u,t) - w(s,t))` over the scanned triples.
    pub max_violation: T,
    /// Triple where the maximum is attained.
    pub witness: (T, T, T),
    /// Relative slack the verdict allows.
    pub tol_rel: T,
    /// True when every triple satisfies `w(s,u)+w(u,t) <= w(s,t)(1+tol_rel)`.
    pub passed: bool,
}

impl<T: Scalar> Control<T> {
    pub fn new(kind: ControlKind<T>, horizon: T) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return invalid(format!("horizon must be positive and finite, got {horizon}"));
        }
        let mut cumulative = None;
        match &kind {
            ControlKind::Linear => {}
            ControlKind::Power { scale, kappa } => {
                if !(*scale > T::zero()) {
                    return invalid("power control needs a positive scale");
                }
                if !(*kappa >= T::one()) {
                    return invalid(format!("power control needs kappa >= 1, got {kappa}"));
                }
            }
            ControlKind::BesovData { profile, theta, hurst, gamma } => {
                if profile.is_empty() {
                    return invalid("besov_data control needs a non-empty profile");
                }
                if profile.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
                    return invalid("besov_data profile must be finite and non-negative");
                }
                let one = T::one();
                let lead = one - *hurst * *gamma;
                if !(lead > T::zero()) {
                    return invalid("besov_data control needs 1 - H gamma > 0");
                }
                if let Some(th) = theta {
                    if !(*th > one) {
                        return invalid("besov_data control needs theta > 1");
                    }
                    if lead - one / *th < -T::lit(1e-14) {
                        return invalid("besov_data control needs 1 - H gamma - 1/theta >= 0");
                    }
                    let dt = horizon / T::lit(profile.len() as f64);
                    let mut acc = Vec::with_capacity(profile.len() + 1);
                    let mut sum = T::zero();
                    acc.push(sum);
                    for v in profile {
                        sum = sum + v.powf(*th) * dt;
                        acc.push(sum);
                    }
                    cumulative = Some(Arc::new(acc));
                }
            }
            ControlKind::Tabulated { values } => {
                let n = values.len();
                if n < 2 || values.iter().any(|row| row.len() != n) {
                    return invalid("tabulated control needs a square table with at least 2 nodes");
                }
                for (i, row) in values.iter().enumerate() {
                    if row[i] != T::zero() {
                        return invalid(format!("tabulated control has w(t_{i},t_{i}) != 0"));
                    }
                    if row[i..].iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
                        return invalid("tabulated control values must be finite and non-negative");
                    }
                }
            }
        }
        let control = Control { kind, horizon, cumulative };
        if let ControlKind::Tabulated { values } = &control.kind {
            // re-verify after interpolation on a refined grid
            let grid = (2 * (values.len() - 1) + 1).min(129);
            let report = control.check_superadditive_tol(grid, T::lit(TABULATED_TOL));
            if !report.passed {
                return invalid(format!(
                    "tabulated control is not superadditive: violation {} at {:?}",
                    report.max_violation, report.witness
                ));
            }
        }
        Ok(control)
    }

    pub fn linear(horizon: T) -> Result<Self> {
        Self::new(ControlKind::Linear, horizon)
    }

    pub fn power(scale: T, kappa: T, horizon: T) -> Result<Self> {
        Self::new(ControlKind::Power { scale, kappa }, horizon)
    }

    /// Control from a norm profile; `theta = None` is `theta = inf`.
    pub fn besov_data(profile: Vec<T>, theta: Option<T>, hurst: T, gamma: T, horizon: T) -> Result<Self> {
        Self::new(ControlKind::BesovData { profile, theta, hurst, gamma }, horizon)
    }

    pub fn tabulated(values: Vec<Vec<T>>, horizon: T) -> Result<Self> {
        Self::new(ControlKind::Tabulated { values }, horizon)
    }

    pub fn kind(&self) -> &ControlKind<T> {
        &self.kind
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// Superadditivity slack appropriate for this kind.
    pub fn default_tol(&self) -> T {
        match self.kind {
            ControlKind::Tabulated { .. } => T::lit(TABULATED_TOL),
            _ => T::lit(CLOSED_FORM_TOL),
        }
    }

    fn check_domain(&self, s: T, t: T) -> Result<(T, T)> {
        let slack = self.horizon * T::lit(1e-12);
        if !(s <= t) {
            return domain(format!("control evaluated with s = {s} > t = {t}"));
        }
        if s < -slack || t > self.horizon + slack {
            return domain(format!("({s}, {t}) lies outside [0, {}]", self.horizon));
        }
        Ok((s.max(T::zero()), t.min(self.horizon)))
    }

    /// `w(s,t)`; `w(s,s) = 0` exactly.
    pub fn eval(&self, s: T, t: T) -> Result<T> {
        let (s, t) = self.check_domain(s, t)?;
        Ok(self.value(s, t))
    }

    /// Unchecked evaluation for `0 <= s <= t <= T`.
    pub(crate) fn value(&self, s: T, t: T) -> T {
        if s >= t {
            return T::zero();
        }
        let len = t - s;
        match &self.kind {
            ControlKind::Linear => len,
            ControlKind::Power { scale, kappa } => *scale * len.powf(*kappa),
            ControlKind::BesovData { profile, theta, hurst, gamma } => {
                let lead = T::one() - *hurst * *gamma;
                let core = match theta {
                    Some(th) => {
                        let mass = self.cumulative_at(t) - self.cumulative_at(s);
                        let mass = mass.max(T::zero());
                        mass.powf(T::one() / *th) * len.powf(lead - T::one() / *th)
                    }
                    None => self.profile_sup(profile, s, t) * len.powf(lead),
                };
                core.powf(T::one() / lead)
            }
            ControlKind::Tabulated { values } => self.interpolate(values, s, t),
        }
    }

    fn cumulative_at(&self, x: T) -> T {
        let acc = self.cumulative.as_ref().expect("finite-theta besov control carries its cumulative table");
        let cells = acc.len() - 1;
        let dt = self.horizon / T::lit(cells as f64);
        let pos = x / dt;
        let k = pos.floor().to_usize().unwrap_or(0).min(cells - 1);
        let frac = pos - T::lit(k as f64);
        acc[k] + (acc[k + 1] - acc[k]) * frac
    }

    fn profile_sup(&self, profile: &[T], s: T, t: T) -> T {
        let cells = profile.len();
        let dt = self.horizon / T::lit(cells as f64);
        let lo = (s / dt).floor().to_usize().unwrap_or(0).min(cells - 1);
        let hi = ((t / dt).ceil().to_usize().unwrap_or(cells)).clamp(lo + 1, cells);
        profile[lo..hi].iter().fold(T::zero(), |m, v| m.max(*v))
    }

    fn interpolate(&self, values: &[Vec<T>], s: T, t: T) -> T {
        let n = values.len() - 1;
        let h = self.horizon / T::lit(n as f64);
        let a = s / h;
        let b = t / h;
        let i = a.floor().to_usize().unwrap_or(0).min(n - 1);
        let j = b.floor().to_usize().unwrap_or(0).min(n - 1);
        let fa = a - T::lit(i as f64);
        let fb = b - T::lit(j as f64);
        let w = |p: usize, q: usize| values[p][q];
        if fa <= fb {
            w(i, j) + fb * (w(i, j + 1) - w(i, j)) + fa * (w(i + 1, j + 1) - w(i, j + 1))
        } else {
            w(i, j) + fa * (w(i + 1, j) - w(i, j)) + fb * (w(i + 1, j + 1) - w(i + 1, j))
        }
    }

    /// `w`-midpoint of `[s,t]` with the default bisection tolerance
    /// `1e-12 (t - s)`.
    pub fn w_midpoint(&self, s: T, t: T) -> Result<T> {
        self.w_midpoint_tol(s, t, T::lit(1e-12))
    }

    /// `inf { r in [s,t] : w(s,r) >= w(s,t)/2 }`, located to absolute tolerance
    /// `tol_rel (t - s)`. Within a flat stretch of `w` the leftmost admissible
    /// point (up to the tolerance) is returned.
    pub fn w_midpoint_tol(&self, s: T, t: T, tol_rel: T) -> Result<T> {
        let (s, t) = self.check_domain(s, t)?;
        if !(s < t) {
            return domain(format!("w-midpoint needs s < t, got [{s}, {t}]"));
        }
        Ok(match &self.kind {
            ControlKind::Linear => s + (t - s) * T::lit(0.5),
            ControlKind::Power { kappa, .. } => s + (t - s) * T::lit(0.5).powf(T::one() / *kappa),
            _ => self.bisect_midpoint(s, t, tol_rel),
        })
    }

    /// Bisection for the `w`-midpoint, available for every kind (the closed
    /// forms above are cross-checked against it).
    pub fn bisect_midpoint(&self, s: T, t: T, tol_rel: T) -> T {
        let target = self.value(s, t) * T::lit(0.5);
        let tol = (tol_rel * (t - s)).max(T::epsilon() * t.mag().max(T::one()));
        let (mut lo, mut hi) = (s, t);
        while hi - lo > tol {
            let mid = lo + (hi - lo) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(s, mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Midpoint used to split `[s,t]` when building dyadic trees. Degenerate
    /// intervals (`w(s,t) = 0`) fall back to the arithmetic midpoint so that the
    /// refinement keeps separating points.
    pub(crate) fn split_point(&self, s: T, t: T) -> T {
        let u = match &self.kind {
            ControlKind::Linear => s + (t - s) * T::lit(0.5),
            ControlKind::Power { kappa, .. } => s + (t - s) * T::lit(0.5).powf(T::one() / *kappa),
            _ => {
                if self.value(s, t) > T::zero() {
                    self.bisect_midpoint(s, t, T::lit(1e-12))
                } else {
                    s + (t - s) * T::lit(0.5)
                }
            }
        };
        if u <= s || u >= t {
            s + (t - s) * T::lit(0.5)
        } else {
            u
        }
    }

    /// Level-`h` `w`-dyadic points of `[s,t]`.
    pub fn dyadic_points(&self, s: T, t: T, h: u32) -> Result<Vec<T>> {
        Ok(self.dyadic_tree_max(s, t, h, DEFAULT_MAX_LEVEL)?.levels.pop().expect("tree has level h"))
    }

    pub fn dyadic_tree(&self, s: T, t: T, h: u32) -> Result<DyadicTree<T>> {
        self.dyadic_tree_max(s, t, h, DEFAULT_MAX_LEVEL)
    }

    /// All levels `0..=h` of the `w`-dyadic refinement of `[s,t]`.
    pub fn dyadic_tree_max(&self, s: T, t: T, h: u32, max_level: u32) -> Result<DyadicTree<T>> {
        if h > max_level {
            return Err(Error::LevelOverflow { level: h, max: max_level });
        }
        let (s, t) = self.check_domain(s, t)?;
        if !(s < t) {
            return domain(format!("dyadic points need s < t, got [{s}, {t}]"));
        }
        let mut levels = Vec::with_capacity(h as usize + 1);
        levels.push(vec![s, t]);
        for _ in 0..h {
            let prev = levels.last().expect("level 0 present");
            let mut next = Vec::with_capacity(2 * prev.len() - 1);
            for w in prev.windows(2) {
                next.push(w[0]);
                next.push(self.split_point(w[0], w[1]));
            }
            next.push(*prev.last().expect("non-empty level"));
            levels.push(next);
        }
        Ok(DyadicTree { base: (s, t), levels })
    }

    /// `|pi|_w = max_{[u,v] in pi} w(u,v)`; zero for a single-point partition.
    pub fn mesh(&self, partition: &Partition<T>) -> Result<T> {
        let mut m = T::zero();
        for (u, v) in partition.intervals() {
            m = m.max(self.eval(u, v)?);
        }
        Ok(m)
    }

    pub fn check_superadditive(&self, grid_n: usize) -> SuperadditivityReport<T> {
        self.check_superadditive_tol(grid_n, self.default_tol())
    }

    pub fn check_superadditive_tol(&self, grid_n: usize, tol_rel: T) -> SuperadditivityReport<T> {
        check_superadditive_with(|s, t| self.value(s, t), self.horizon, grid_n, tol_rel)
    }

    /// Hypothesis of the Kolmogorov continuity criterion: adjacent
    /// dyadic intervals must have positive control.
    pub fn is_strictly_increasing_on(&self, tree: &DyadicTree<T>) -> bool {
        tree.levels.iter().all(|lv| lv.windows(2).all(|w| w[0] < w[1] && self.value(w[0], w[1]) > T::zero()))
    }
}

/// Exhaustive scan of `w(s,u) + w(u,t) <= w(s,t)` over the uniform grid of
/// `grid_n` points on `[0, horizon]`, for any two-parameter function.
pub fn check_superadditive_with<T: Scalar>(
    w: impl Fn(T, T) -> T,
    horizon: T,
    grid_n: usize,
    tol_rel: T,
) -> SuperadditivityReport<T> {
    assert!(grid_n >= 3, "superadditivity scan needs at least 3 grid points");
    let pts: Vec<T> = (0..grid_n).map(|k| horizon * T::lit(k as f64 / (grid_n - 1) as f64)).collect();
    // table of w on the grid, upper triangle
    let table: Vec<Vec<T>> = (0..grid_n).map(|i| (0..grid_n).map(|j| if i <= j { w(pts[i], pts[j]) } else { T::zero() }).collect()).collect();
    let mut worst = T::neg_infinity();
    let mut witness = (pts[0], pts[0], pts[0]);
    let mut passed = true;
    for i in 0..grid_n {
        for k in i..grid_n {
            let whole = table[i][k];
            for j in i..=k {
                let parts = table[i][j] + table[j][k];
                let excess = parts - whole;
                if excess > worst {
                    worst = excess;
                    witness = (pts[i], pts[j], pts[k]);
                }
                if parts > whole * (T::one() + tol_rel) + T::epsilon() * T::lit(4.0) * whole.mag() {
                    passed = false;
                }
            }
        }
    }
    SuperadditivityReport { max_violation: worst, witness, tol_rel, passed }
}

/// Nested `w`-dyadic points `d^h_i`, `h = 0..=depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicTree<T> {
    pub base: (T, T),
    pub levels: Vec<Vec<T>>,
}

impl<T: Scalar> DyadicTree<T> {
    pub fn depth(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn level(&self, h: u32) -> &[T] {
        &self.levels[h as usize]
    }

    pub fn partition(&self, h: u32) -> Partition<T> {
        Partition { points: self.levels[h as usize].clone() }
    }
}

/// Strictly increasing finite set of times. A single point is the degenerate
/// partition carrying the empty Riemann sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Partition<T> {
    points: Vec<T>,
}

impl<T: Scalar> Partition<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidPartition("no points".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPartition("non-finite point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidPartition(format!("points not strictly increasing at {} >= {}", w[0], w[1])));
        }
        Ok(Partition { points })
    }

    pub fn single(t: T) -> Self {
        Partition { points: vec![t] }
    }

    /// `n` equal steps on `[s,t]`.
    pub fn uniform(s: T, t: T, n: usize) -> Result<Self> {
        if n == 0 || !(s < t) {
            return Err(Error::InvalidPartition(format!("uniform partition of [{s}, {t}] into {n}")));
        }
        let step = (t - s) / T::lit(n as f64);
        let mut points: Vec<T> = (0..n).map(|k| s + step * T::lit(k as f64)).collect();
        points.push(t);
        Self::new(points)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn len_intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> T {
        self.points[0]
    }

    pub fn end(&self) -> T {
        *self.points.last().expect("partition is non-empty")
    }

    pub fn intervals(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// Concatenation of a partition of `[s,u]` with one of `[u,t]`.
    pub fn concat(&self, other: &Partition<T>) -> Result<Self> {
        if self.end() != other.start() {
            return Err(Error::InvalidPartition("concatenated partitions must share the junction point".into()));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points[1..]);
        Self::new(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin() -> Control<f64> {
        Control::linear(2.0).unwrap()
    }

    fn pow2() -> Control<f64> {
        Control::power(1.0, 2.0, 1.0).unwrap()
    }

    fn besov_flat() -> Control<f64> {
        Control::besov_data(vec![1.0; 8], Some(2.0), 0.25, 1.0, 1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(lin().eval(0.0, 2.0).unwrap(), 2.0);
        assert_eq!(pow2().eval(0.0, 0.0).unwrap(), 0.0);
        assert!((besov_flat().eval(0.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((besov_flat().eval(0.25, 0.6).unwrap() - 0.35).abs() < 1e-14);
    }

    #[test]
    fn eval_domain_errors() {
        assert!(lin().eval(1.0, 0.5).is_err());
        assert!(lin().eval(-0.5, 0.5).is_err());
        assert!(lin().eval(0.0, 2.5).is_err());
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(Control::power(1.0, 0.5, 1.0).is_err());
        assert!(Control::<f64>::linear(0.0).is_err());
        assert!(Control::besov_data(vec![1.0], Some(2.0), 0.5, 2.0, 1.0).is_err());
        assert!(Control::besov_data(vec![-1.0], Some(2.0), 0.25, 1.0, 1.0).is_err());
        assert!(Control::tabulated(vec![vec![0.0, 1.0], vec![0.0, 0.5]], 1.0).is_err());
    }

    #[test]
    fn midpoint_examples() {
        assert_eq!(lin().w_midpoint(0.0, 2.0).unwrap(), 1.0);
        let u = pow2().w_midpoint(0.0, 1.0).unwrap();
        assert!((u - 0.5f64.sqrt()).abs() < 1e-15);
        // the closed form agrees with plain bisection
        let b = pow2().bisect_midpoint(0.0, 1.0, 1e-12);
        assert!((b - 0.5f64.sqrt()).abs() < 1e-11);
        let c = besov_flat().w_midpoint(0.0, 1.0).unwrap();
        assert!((c - 0.5).abs() < 1e-11);
        assert!(lin().w_midpoint(1.0, 1.0).is_err());
    }

    #[test]
    fn midpoint_halves_the_control() {
        for c in [lin(), pow2(), besov_flat()] {
            let t = c.horizon();
            let u = c.w_midpoint(0.1 * t, 0.9 * t).unwrap();
            let whole = c.eval(0.1 * t, 0.9 * t).unwrap();
            assert!(c.eval(0.1 * t, u).unwrap() <= 0.5 * whole * (1.0 + 1e-9));
            assert!(c.eval(u, 0.9 * t).unwrap() <= 0.5 * whole * (1.0 + 1e-9));
        }
    }

    #[test]
    fn dyadic_examples() {
        let c = Control::linear(1.0).unwrap();
        assert_eq!(c.dyadic_points(0.0, 1.0, 2).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let p = pow2().dyadic_points(0.0, 1.0, 1).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(c.dyadic_points(0.0, 1.0, 25), Err(Error::LevelOverflow { .. })));
    }

    #[test]
    fn dyadic_nesting_and_bound() {
        for c in [Control::linear(1.0).unwrap(), pow2(), besov_flat()] {
            let tree = c.dyadic_tree(0.0, 1.0, 8).unwrap();
            let whole = c.eval(0.0, 1.0).unwrap();
            for h in 0..8u32 {
                let coarse = tree.level(h);
                let fine = tree.level(h + 1);
                for (i, x) in coarse.iter().enumerate() {
                    assert_eq!(fine[2 * i], *x);
                }
                for w in fine.windows(2) {
                    let bound = whole * 0.5f64.powi(h as i32 + 1);
                    assert!(c.eval(w[0], w[1]).unwrap() <= bound * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn mesh_examples() {
        let pi = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(Control::linear(1.0).unwrap().mesh(&pi).unwrap(), 0.5);
        assert_eq!(pow2().mesh(&pi).unwrap(), 0.25);
        assert_eq!(pow2().mesh(&Partition::single(0.3)).unwrap(), 0.0);
    }

    #[test]
    fn superadditivity_scan() {
        let r = Control::linear(1.0).unwrap().check_superadditive(64);
        assert!(r.passed);
        assert!(r.max_violation <= 1e-15);
        let sqrt = check_superadditive_with(|s: f64, t: f64| (t - s).sqrt(), 1.0, 64, 1e-12);
        assert!(!sqrt.passed);
        assert!(sqrt.max_violation > 0.1);
        let (s, u, t) = sqrt.witness;
        assert!(s < u && u < t);
    }

    #[test]
    fn besov_random_profile_is_superadditive() {
        use rand::Rng;
        let mut rng = crate::rng::stream(7, 0);
        let profile: Vec<f64> = (0..37).map(|_| rng.random::<f64>() * 3.0).collect();
        let c = Control::besov_data(profile.clone(), Some(3.0), 0.3, 1.2, 1.0).unwrap();
        let r = c.check_superadditive(64);
        assert!(r.max_violation <= 1e-9, "violation {}", r.max_violation);
        let inf = Control::besov_data(profile, None, 0.3, 1.2, 1.0).unwrap();
        assert!(inf.check_superadditive(48).passed);
    }

    #[test]
    fn besov_matches_closed_form() {
        // profile 1 on [0, 1/2), 3 on [1/2, 1)
        let (th, h, g) = (2.0, 0.25, 1.0);
        let c = Control::besov_data(vec![1.0, 3.0], Some(th), h, g, 1.0).unwrap();
        let (s, t) = (0.2f64, 0.9f64);
        let mass: f64 = 0.3 * 1.0 + 0.4 * 9.0;
        let lead = 1.0 - h * g;
        let expect = (mass.powf(1.0 / th) * (t - s).powf(lead - 1.0 / th)).powf(1.0 / lead);
        assert!((c.eval(s, t).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn tabulated_interpolates_and_vanishes_on_diagonal() {
        let n = 8;
        let values: Vec<Vec<f64>> = (0..=n)
            .map(|i| (0..=n).map(|j| if j >= i { ((j - i) as f64 / n as f64).powi(2) } else { 0.0 }).collect())
            .collect();
        let c = Control::tabulated(values, 1.0).unwrap();
        assert_eq!(c.eval(0.33, 0.33).unwrap(), 0.0);
        assert!((c.eval(0.25, 0.75).unwrap() - 0.25).abs() < 1e-14);
        assert!(c.check_superadditive(33).passed);
        let bad: Vec<Vec<f64>> = (0..=n)
            .map(|i| (0..=n).map(|j| if j >= i { ((j - i) as f64 / n as f64).sqrt() } else { 0.0 }).collect())
            .collect();
        assert!(Control::tabulated(bad, 1.0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let c = Control::besov_data(vec![1.0, 2.0], None, 0.4, 0.5, 2.0).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"kind\":\"besov_data\""));
        let back: Control<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.eval(0.5, 1.5).unwrap(), c.eval(0.5, 1.5).unwrap());
        let bad = r#"{"horizon":1.0,"kind":"power","scale":1.0,"kappa":0.5}"#;
        assert!(serde_json::from_str::<Control<f64>>(bad).is_err());
    }

    #[test]
    fn partitions() {
        assert!(Partition::new(vec![0.0, 0.0]).is_err());
        assert!(Partition::<f64>::new(vec![]).is_err());
        let a = Partition::uniform(0.0, 1.0, 4).unwrap();
        let b = Partition::uniform(1.0, 2.0, 2).unwrap();
        let ab = a.concat(&b).unwrap();
        assert_eq!(ab.len_intervals(), 6);
        assert!(b.concat(&a).is_err());
    }

    #[test]
    fn single_precision_controls() {
        let c = Control::<f32>::power(1.0, 2.0, 1.0).unwrap();
        let u = c.w_midpoint(0.0, 1.0).unwrap();
        assert!((u - 0.5f32.sqrt()).abs() < 1e-6);
        assert!(c.dyadic_tree(0.0, 1.0, 6).is_ok());
    }
}
