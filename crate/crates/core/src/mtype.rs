//! Martingale-type inequalities on the uniform binary coin filtration, where
//! every conditional expectation is an exact finite average.
//!
//! A random variable measurable at level `h` is a [`Layer`]: one vector of
//! `R^k` per history of `h` coin flips. Node `i` at level `h` has children
//! `2i` and `2i+1`; leaf `l` of a depth-`N` tree lies below node `l >> (N-h)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::sewing::value::lp_norm;

/// Largest depth whose `2^N` leaves are enumerated.
pub const MAX_ENUMERATION_DEPTH: usize = 16;

/// Leaves per parallel block; blocks are reduced in index order.
const BLOCK: usize = 1 << 10;

/// An `R^k`-valued random variable measurable at level `level`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub level: usize,
    pub dim: usize,
    data: Vec<f64>,
}

impl Layer {
    pub fn new(level: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if level > MAX_ENUMERATION_DEPTH {
            return Err(Error::EnumerationTooLarge { depth: level, max: MAX_ENUMERATION_DEPTH });
        }
        if dim == 0 || data.len() != dim << level {
            return Err(Error::Shape(format!("level {level} with dimension {dim} needs {} entries, got {}", dim << level, data.len())));
        }
        Ok(Layer { level, dim, data })
    }

    pub fn zeros(level: usize, dim: usize) -> Self {
        Layer { level, dim, data: vec![0.0; dim << level] }
    }

    pub fn from_fn(level: usize, dim: usize, mut f: impl FnMut(usize, &mut [f64])) -> Result<Self> {
        let mut layer = Layer::new(level, dim, vec![0.0; dim << level])?;
        for i in 0..1usize << level {
            f(i, &mut layer.data[i * dim..(i + 1) * dim]);
        }
        Ok(layer)
    }

    pub fn nodes(&self) -> usize {
        1 << self.level
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Value on the history of leaf `leaf` in a tree of depth `depth`.
    pub fn at_leaf(&self, leaf: usize, depth: usize) -> &[f64] {
        self.node(leaf >> (depth - self.level))
    }

    /// Same random variable viewed at a finer level.
    pub fn lift(&self, level: usize) -> Result<Layer> {
        if level < self.level {
            return invalid(format!("cannot lift level {} to coarser level {level}", self.level));
        }
        Layer::from_fn(level, self.dim, |i, out| out.copy_from_slice(self.node(i >> (level - self.level))))
    }

    pub fn combine(&self, a: f64, other: &Layer, b: f64) -> Result<Layer> {
        let level = self.level.max(other.level);
        let (x, y) = (self.lift(level)?, other.lift(level)?);
        if x.dim != y.dim {
            return Err(Error::Shape("layers of different dimension".into()));
        }
        let data = x.data.iter().zip(&y.data).map(|(u, v)| a * u + b * v).collect();
        Layer::new(level, x.dim, data)
    }
}

/// `E(X | F_{h-1})` for `X` at level `h`: the average of the two children.
pub fn cond_expectation(x: &Layer) -> Result<Layer> {
    if x.level == 0 {
        return invalid("level-0 variables have no coarser level");
    }
    Layer::from_fn(x.level - 1, x.dim, |i, out| {
        let (a, b) = (x.node(2 * i), x.node(2 * i + 1));
        for (o, (u, v)) in out.iter_mut().zip(a.iter().zip(b)) {
            *o = 0.5 * (u + v);
        }
    })
}

/// `E(X | F_h)` for any `h` at or below the level of `X`.
pub fn cond_expectation_to(x: &Layer, h: usize) -> Result<Layer> {
    if h > x.level {
        return x.lift(h);
    }
    let mut y = x.clone();
    while y.level > h {
        y = cond_expectation(&y)?;
    }
    Ok(y)
}

/// Martingale `f_h = E(f_N | F_h)` in `l^p(R^k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeMartingale {
    pub p: f64,
    levels: Vec<Layer>,
}

impl TreeMartingale {
    /// The martingale closed by the terminal values `f_N`.
    pub fn from_terminal(p: f64, terminal: Layer) -> Result<Self> {
        check_p(p)?;
        let mut levels = vec![terminal];
        while levels[0].level > 0 {
            levels.insert(0, cond_expectation(&levels[0])?);
        }
        Ok(TreeMartingale { p, levels })
    }

    /// `f_0` plus increments `df_n = eps_n v_n`, where `v_n` is produced from
    /// the history before flip `n` and `eps_n = +-1` is flip `n`.
    pub fn from_predictable(p: f64, depth: usize, dim: usize, f0: &[f64], mut v: impl FnMut(usize, usize, &mut [f64])) -> Result<Self> {
        check_p(p)?;
        if f0.len() != dim {
            return Err(Error::Shape("f0 has the wrong dimension".into()));
        }
        let mut levels = vec![Layer::new(0, dim, f0.to_vec())?];
        let mut step = vec![0.0; dim];
        for n in 1..=depth {
            let prev = &levels[n - 1];
            let mut next = Layer::zeros(n, dim);
            if n > MAX_ENUMERATION_DEPTH {
                return Err(Error::EnumerationTooLarge { depth, max: MAX_ENUMERATION_DEPTH });
            }
            for parent in 0..prev.nodes() {
                v(n, parent, &mut step);
                for (child, sign) in [(2 * parent, -1.0), (2 * parent + 1, 1.0)] {
                    let out = &mut next.data[child * dim..(child + 1) * dim];
                    for ((o, f), s) in out.iter_mut().zip(prev.node(parent)).zip(&step) {
                        *o = f + sign * s;
                    }
                }
            }
            levels.push(next);
        }
        Ok(TreeMartingale { p, levels })
    }

    /// `f_N = sum_n eps_n e_n` in `l^p(R^N)`.
    pub fn sign(depth: usize, p: f64) -> Result<Self> {
        TreeMartingale::from_predictable(p, depth, depth.max(1), &vec![0.0; depth.max(1)], |n, _, out| {
            out.fill(0.0);
            out[n - 1] = 1.0;
        })
    }

    /// Gaussian predictable amplitudes scaled by `2^{-decay n}`, keyed by
    /// `(seed, n, history)` so truncations of deeper trees agree.
    pub fn decaying(depth: usize, dim: usize, p: f64, decay: f64, seed: u64) -> Result<Self> {
        let f0: Vec<f64> = {
            let mut r = rng::keyed(seed, &[0, 0]);
            (0..dim).map(|_| r.sample(StandardNormal)).collect()
        };
        TreeMartingale::from_predictable(p, depth, dim, &f0, |n, parent, out| {
            let mut r = rng::keyed(seed, &[n as u64, parent as u64]);
            let a = (-decay * n as f64).exp2();
            out.iter_mut().for_each(|o| *o = a * r.sample::<f64, _>(StandardNormal));
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim
    }

    pub fn level(&self, h: usize) -> &Layer {
        &self.levels[h]
    }

    /// `df_n = f_n - f_{n-1}` at level `n >= 1`.
    pub fn increment(&self, n: usize) -> Result<Layer> {
        if n == 0 || n > self.depth() {
            return invalid(format!("increment index {n} outside 1..={}", self.depth()));
        }
        self.levels[n].combine(1.0, &self.levels[n - 1], -1.0)
    }

    /// Largest violation of `E(df_{h+1} | F_h) = 0` over all nodes.
    pub fn martingale_defect(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for n in 1..=self.depth() {
            let e = cond_expectation(&self.increment(n)?)?;
            worst = e.data.iter().fold(worst, |m, x| m.max(x.abs()));
        }
        Ok(worst)
    }

    /// `|f_N|_{L_m(V)} / |(|f_0|^p_hat + sum |df_n|^p_hat)^{1/p_hat}|_{L_m}`,
    /// both sides by enumerating every leaf.
    pub fn type_ratio(&self, p_hat: f64, m: f64) -> Result<f64> {
        let (num, den) = self.type_sides(p_hat, m)?;
        Ok(num / den)
    }

    /// Both sides of the martingale-type inequality.
    pub fn type_sides(&self, p_hat: f64, m: f64) -> Result<(f64, f64)> {
        let depth = self.depth();
        if depth > MAX_ENUMERATION_DEPTH {
            return Err(Error::EnumerationTooLarge { depth, max: MAX_ENUMERATION_DEPTH });
        }
        if !(m > 1.0 && m.is_finite()) || !(p_hat >= 1.0 && p_hat <= 2.0) {
            return invalid(format!("need m in (1, inf) and p_hat in [1, 2], got m = {m}, p_hat = {p_hat}"));
        }
        let incs: Vec<Layer> = (1..=depth).map(|n| self.increment(n)).collect::<Result<_>>()?;
        let leaves = 1usize << depth;
        let p = self.p;
        let f0 = lp_norm(self.levels[0].node(0), p).powf(p_hat);
        let partial: Vec<(f64, f64)> = (0..leaves)
            .collect::<Vec<_>>()
            .par_chunks(BLOCK)
            .map(|block| {
                let mut acc = (0.0, 0.0);
                for &leaf in block {
                    acc.0 += lp_norm(self.levels[depth].node(leaf), p).powf(m);
                    let sq: f64 = f0 + incs.iter().map(|d| lp_norm(d.at_leaf(leaf, depth), p).powf(p_hat)).sum::<f64>();
                    acc.1 += sq.powf(m / p_hat);
                }
                acc
            })
            .collect();
        let (a, b) = partial.iter().fold((0.0, 0.0), |s, x| (s.0 + x.0, s.1 + x.1));
        let n = leaves as f64;
        Ok(((a / n).powf(1.0 / m), (b / n).powf(1.0 / m)))
    }

    /// `(E|f_N|^2, |f_0|^2 + sum E|df_n|^2)` with the Euclidean norm.
    pub fn pythagorean_sides(&self) -> Result<(f64, f64)> {
        let depth = self.depth();
        let mean_sq = |x: &Layer| x.data.iter().map(|v| v * v).sum::<f64>() / x.nodes() as f64;
        let mut rhs = mean_sq(&self.levels[0]);
        for n in 1..=depth {
            rhs += mean_sq(&self.increment(n)?);
        }
        Ok((mean_sq(&self.levels[depth]), rhs))
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return invalid(format!("l^p exponent must be at least 1, got {p}"));
    }
    Ok(())
}

/// Adapted sequence `y_0, ..., y_K` with `y_k` measurable at level `start + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeSequence {
    pub p: f64,
    pub start: usize,
    terms: Vec<Layer>,
}

/// Generators of adapted sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// `y_k = eps_k v_k` with `v_k` predictable: conditional means vanish.
    Sign,
    /// `y_k = a_k + eps_k v_k` with predictable drift `a_k`.
    DriftNoise,
    /// Arbitrary adapted Gaussian terms with amplitude `2^{-k/2}`.
    Decaying,
}

impl TreeSequence {
    pub fn new(p: f64, start: usize, terms: Vec<Layer>) -> Result<Self> {
        check_p(p)?;
        if terms.is_empty() {
            return invalid("sequence needs at least y_0");
        }
        for (k, y) in terms.iter().enumerate() {
            if y.level != start + k || y.dim != terms[0].dim {
                return Err(Error::Shape(format!("term {k} must be a level-{} layer of dimension {}", start + k, terms[0].dim)));
            }
        }
        Ok(TreeSequence { p, start, terms })
    }

    /// `len` terms of dimension `dim` starting at level `start`, keyed by
    /// `(seed, k, node)` so that shorter sequences are prefixes of longer ones.
    pub fn generate(kind: SequenceKind, len: usize, start: usize, dim: usize, p: f64, seed: u64) -> Result<Self> {
        if start + len > MAX_ENUMERATION_DEPTH + 1 {
            return Err(Error::EnumerationTooLarge { depth: start + len - 1, max: MAX_ENUMERATION_DEPTH });
        }
        let gauss = |key: &[u64], out: &mut [f64], scale: f64| {
            let mut r = rng::keyed(seed, key);
            out.iter_mut().for_each(|o| *o = scale * r.sample::<f64, _>(StandardNormal));
        };
        let mut terms = Vec::with_capacity(len);
        for k in 0..len {
            let level = start + k;
            let layer = Layer::from_fn(level, dim, |node, out| {
                if k == 0 {
                    gauss(&[0, node as u64, 0], out, 1.0);
                    return;
                }
                let parent = node >> 1;
                let eps = if node & 1 == 1 { 1.0 } else { -1.0 };
                match kind {
                    SequenceKind::Sign => {
                        gauss(&[k as u64, parent as u64, 1], out, eps);
                    }
                    SequenceKind::DriftNoise => {
                        let mut drift = vec![0.0; out.len()];
                        gauss(&[k as u64, parent as u64, 2], &mut drift, 0.5);
                        gauss(&[k as u64, parent as u64, 1], out, eps);
                        out.iter_mut().zip(&drift).for_each(|(o, a)| *o += a);
                    }
                    SequenceKind::Decaying => {
                        gauss(&[k as u64, node as u64, 3], out, (-(k as f64) / 2.0).exp2());
                    }
                }
            })?;
            terms.push(layer);
        }
        TreeSequence::new(p, start, terms)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.start + self.terms.len() - 1
    }

    pub fn term(&self, k: usize) -> &Layer {
        &self.terms[k]
    }

    /// Doob split `sum y_k = J + M` with `J = sum_{k>=1} E_{k-1} y_k` and
    /// `M = y_0 + sum_{k>=1} (y_k - E_{k-1} y_k)`, all at the terminal level.
    pub fn doob_split(&self) -> Result<DoobSplit> {
        let depth = self.depth();
        let mut total = self.terms[0].lift(depth)?;
        let mut drift = Layer::zeros(depth, self.terms[0].dim);
        let mut mart = total.clone();
        for y in &self.terms[1..] {
            let e = cond_expectation(y)?;
            total = total.combine(1.0, y, 1.0)?;
            drift = drift.combine(1.0, &e, 1.0)?;
            mart = mart.combine(1.0, &y.combine(1.0, &e, -1.0)?, 1.0)?;
        }
        Ok(DoobSplit { total, drift, martingale: mart })
    }

    /// Both sides of the conditional Doob inequality with `G = F_g`,
    /// `g <= start`: the left side `|| ||sum y_k | G||_{V;m} ||_n`, the drift
    /// sum and the `l^p_hat` sum of `|| ||y_k | G||_{V;m} ||_n`.
    pub fn doob_ineq(&self, p_hat: f64, m: f64, n: f64, g: usize, c: f64) -> Result<DoobReport> {
        if g > self.start {
            return invalid(format!("conditioning level {g} must not exceed the first term's level {}", self.start));
        }
        if !(m >= p_hat && n >= p_hat && p_hat >= 1.0 && p_hat <= 2.0) || !m.is_finite() {
            return invalid(format!("need finite m >= p_hat, n >= p_hat, p_hat in [1, 2]; got m = {m}, n = {n}, p_hat = {p_hat}"));
        }
        let norm = |x: &Layer| cond_norm(x, self.p, m, n, g);
        let split = self.doob_split()?;
        let lhs = norm(&split.total)?;
        let mut drift = 0.0;
        let mut quad = norm(&self.terms[0])?.powf(p_hat);
        for y in &self.terms[1..] {
            drift += norm(&cond_expectation(y)?)?;
            quad += norm(y)?.powf(p_hat);
        }
        let quad = quad.powf(1.0 / p_hat);
        let rhs = drift + 2.0 * c * quad;
        let min_c = if quad > 0.0 { ((lhs - drift) / (2.0 * quad)).max(0.0) } else { 0.0 };
        Ok(DoobReport { lhs, drift, quad, c, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 }, min_c })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoobSplit {
    pub total: Layer,
    pub drift: Layer,
    pub martingale: Layer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoobReport {
    pub lhs: f64,
    /// `sum_{k>=1} || ||E_{k-1} y_k | G||_{V;m} ||_n`.
    pub drift: f64,
    /// `(sum_k || ||y_k | G||_{V;m} ||_n^p_hat)^{1/p_hat}`.
    pub quad: f64,
    pub c: f64,
    /// `lhs / (drift + 2 c quad)`.
    pub ratio: f64,
    /// Smallest `C >= 0` with `ratio <= 1`.
    pub min_c: f64,
}

/// `|| (E(|X|_V^m | F_g))^{1/m} ||_{L_n}` with `n = inf` taken as the maximum
/// over the atoms of `F_g`.
pub fn cond_norm(x: &Layer, p: f64, m: f64, n: f64, g: usize) -> Result<f64> {
    if g > x.level {
        return invalid("conditioning level finer than the variable");
    }
    let per_node: Vec<f64> = (0..x.nodes()).map(|i| lp_norm(x.node(i), p).powf(m)).collect();
    let span = 1usize << (x.level - g);
    let atoms: Vec<f64> = per_node.chunks(span).map(|c| (c.iter().sum::<f64>() / span as f64).powf(1.0 / m)).collect();
    Ok(if n.is_infinite() {
        atoms.iter().fold(0.0, |a, b| a.max(*b))
    } else {
        (atoms.iter().map(|a| a.powf(n)).sum::<f64>() / atoms.len() as f64).powf(1.0 / n)
    })
}
