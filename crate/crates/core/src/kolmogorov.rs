//! Kolmogorov-type modulus `M_beta = sup |A_t - A_s| / w(s,t)^beta` over the
//! chaining family of w-dyadic pairs, and its ensemble tail behaviour.
//!
//! The control is normalised so that `w(0,T) = 1`; at level `h` the family
//! holds every pair of level-`h` points with normalised `w <= 2^{1-h}`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{Control, DyadicTree};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::sewing::value::Value;
use crate::stats;

/// Uniform cells scanned for flat stretches of the control.
const FLAT_SCAN_CELLS: usize = 1024;

/// Checks the control and tree and returns the normalising constant `w(0,T)`.
fn checked_scale<T: Scalar>(tree: &DyadicTree<T>, control: &Control<T>) -> Result<f64> {
    let (s, t) = tree.base;
    let step = (t - s) / T::lit(FLAT_SCAN_CELLS as f64);
    let mut flat = !control.is_strictly_increasing_on(tree);
    for k in 0..FLAT_SCAN_CELLS {
        let a = s + step * T::lit(k as f64);
        let b = if k + 1 == FLAT_SCAN_CELLS { t } else { a + step };
        flat |= !(control.eval(a, b)? > T::zero());
    }
    if flat {
        return Err(Error::Domain("the modulus statistic needs a strictly increasing control".into()));
    }
    Ok(control.eval(s, t)?.as_f64())
}

/// `max` over level `h` pairs of `|A_t - A_s| / w(s,t)^beta`, for every level
/// `0..=depth` and every `beta`: `out[b][h]`. `values[i]` is the process at
/// point `i` of the finest level.
pub fn level_maxima<T: Scalar, V: Value<T>>(tree: &DyadicTree<T>, values: &[V], control: &Control<T>, betas: &[f64]) -> Result<Vec<Vec<f64>>> {
    let depth = tree.depth() as usize;
    let finest = tree.level(depth as u32);
    if values.len() != finest.len() {
        return Err(Error::Shape(format!("{} values for {} finest-level points", values.len(), finest.len())));
    }
    let scale = checked_scale(tree, control)?;
    let mut out = vec![vec![0.0; depth + 1]; betas.len()];
    for h in 0..=depth {
        let stride = 1usize << (depth - h);
        let pts = tree.level(h as u32);
        let bound = (1.0 - h as f64).exp2();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let w = control.eval(pts[i], pts[j])?.as_f64() / scale;
                if w > bound {
                    break;
                }
                let inc = values[j * stride].distance(&values[i * stride]).as_f64();
                for (b, beta) in betas.iter().enumerate() {
                    let r = inc / w.powf(*beta);
                    if r > out[b][h] {
                        out[b][h] = r;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `M_beta` over levels `0..=h_max` of the tree.
pub fn modulus_statistic<T: Scalar, V: Value<T>>(tree: &DyadicTree<T>, values: &[V], control: &Control<T>, beta: f64, h_max: u32) -> Result<f64> {
    if h_max > tree.depth() {
        return Err(Error::LevelOverflow { level: h_max, max: tree.depth() });
    }
    let per_level = level_maxima(tree, values, control, &[beta])?;
    Ok(per_level[0][..=h_max as usize].iter().fold(0.0, |a, b| a.max(*b)))
}

/// Ensemble statistics of `M_beta` per `beta` and per refinement level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub betas: Vec<f64>,
    pub levels: Vec<u32>,
    pub moment: f64,
    /// `values[b][l][path]`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub median: Vec<Vec<f64>>,
    pub q90: Vec<Vec<f64>>,
    pub mean: Vec<Vec<f64>>,
    /// Empirical `L^moment` norm, `lm_norm[b][l]`.
    pub lm_norm: Vec<Vec<f64>>,
    /// Least-squares slope of `log2 lm_norm` against level, per beta.
    pub trend: Vec<f64>,
}

impl ModulusReport {
    /// Columns `beta,level,median,q90,mean,lm_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "beta,level,median,q90,mean,lm_norm")?;
        for (b, beta) in self.betas.iter().enumerate() {
            for (l, level) in self.levels.iter().enumerate() {
                writeln!(out, "{beta},{level},{},{},{},{}", self.median[b][l], self.q90[b][l], self.mean[b][l], self.lm_norm[b][l])?;
            }
        }
        Ok(())
    }
}

/// Runs `sample(i)` for every path index, which must return the process at the
/// finest points of `tree`, and aggregates `M_beta` at each requested level.
pub fn tail_study<T, V, F>(paths: usize, sample: F, tree: &DyadicTree<T>, control: &Control<T>, betas: &[f64], levels: &[u32], moment: f64) -> Result<ModulusReport>
where
    T: Scalar,
    V: Value<T>,
    F: Fn(usize) -> Result<Vec<V>> + Sync,
{
    if paths == 0 || betas.is_empty() || levels.is_empty() {
        return invalid("tail study needs paths, betas and levels");
    }
    if let Some(&bad) = levels.iter().find(|&&l| l > tree.depth()) {
        return Err(Error::LevelOverflow { level: bad, max: tree.depth() });
    }
    let per_path: Vec<Vec<Vec<f64>>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let maxima = level_maxima(tree, &sample(i)?, control, betas)?;
            Ok(maxima
                .iter()
                .map(|row| levels.iter().map(|&l| row[..=l as usize].iter().fold(0.0f64, |a, b| a.max(*b))).collect())
                .collect())
        })
        .collect::<Result<_>>()?;
    let nb = betas.len();
    let nl = levels.len();
    let values: Vec<Vec<Vec<f64>>> = (0..nb).map(|b| (0..nl).map(|l| per_path.iter().map(|p| p[b][l]).collect()).collect()).collect();
    let summary = |f: &dyn Fn(&[f64]) -> f64| -> Vec<Vec<f64>> { values.iter().map(|row| row.iter().map(|v| f(v)).collect()).collect() };
    let lm = summary(&|v| stats::lm_norm(v, moment));
    let trend = if nl >= 2 {
        let xs: Vec<f64> = levels.iter().map(|l| *l as f64).collect();
        lm.iter()
            .map(|row| {
                let ys: Vec<f64> = row.iter().map(|v| v.max(f64::MIN_POSITIVE).log2()).collect();
                stats::least_squares(&xs, &ys).map(|f| f.slope)
            })
            .collect::<Result<_>>()?
    } else {
        vec![0.0; nb]
    };
    Ok(ModulusReport {
        betas: betas.to_vec(),
        levels: levels.to_vec(),
        moment,
        median: summary(&|v| stats::quantile(v, 0.5)),
        q90: summary(&|v| stats::quantile(v, 0.9)),
        mean: summary(&stats::mean),
        lm_norm: lm,
        trend,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(h: u32) -> (Control<f64>, DyadicTree<f64>) {
        let c = Control::linear(1.0).unwrap();
        let tree = c.dyadic_tree(0.0, 1.0, h).unwrap();
        (c, tree)
    }

    #[test]
    fn constant_path_is_zero() {
        let (c, tree) = setup(6);
        let v = vec![2.5f64; tree.level(6).len()];
        assert_eq!(modulus_statistic(&tree, &v, &c, 0.5, 6).unwrap(), 0.0);
    }

    #[test]
    fn identity_path_with_beta_one() {
        let (c, tree) = setup(8);
        let v: Vec<f64> = tree.level(8).to_vec();
        let m = modulus_statistic(&tree, &v, &c, 1.0, 8).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_flat_control() {
        // zero profile on the first half: w vanishes on [0, 1/2]
        let c = Control::besov_data(vec![0.0, 1.0], Some(2.0), 0.5, 0.0, 1.0).unwrap();
        let tree = c.dyadic_tree(0.0, 1.0, 2).unwrap();
        let v = vec![0.0f64; tree.level(2).len()];
        assert!(modulus_statistic(&tree, &v, &c, 0.5, 2).is_err());
    }

    #[test]
    fn monotone_in_level_and_beta_and_scaling() {
        let (c, tree) = setup(10);
        let v: Vec<f64> = tree.level(10).iter().map(|t| (17.0 * t).sin() + t.sqrt()).collect();
        let mut prev = 0.0;
        for h in 0..=10 {
            let m = modulus_statistic(&tree, &v, &c, 0.4, h).unwrap();
            assert!(m >= prev);
            prev = m;
        }
        let lo = modulus_statistic(&tree, &v, &c, 0.2, 10).unwrap();
        let hi = modulus_statistic(&tree, &v, &c, 0.6, 10).unwrap();
        assert!(hi >= lo);
        let scaled: Vec<f64> = v.iter().map(|x| 3.0 * x).collect();
        assert!((modulus_statistic(&tree, &scaled, &c, 0.4, 10).unwrap() - 3.0 * prev).abs() < 1e-12 * prev);
    }

    #[test]
    fn normalised_control() {
        // w = 5 (t - s) gives the same statistic as the linear control
        let (c, tree) = setup(6);
        let c5 = Control::power(5.0, 1.0, 1.0).unwrap();
        let v: Vec<f64> = tree.level(6).iter().map(|t| t * t).collect();
        let a = modulus_statistic(&tree, &v, &c, 0.5, 6).unwrap();
        let b = modulus_statistic(&tree, &v, &c5, 0.5, 6).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn deterministic_tail_study() {
        let (c, tree) = setup(6);
        let pts = tree.level(6).to_vec();
        let r = tail_study(3, |_| Ok(pts.clone()), &tree, &c, &[1.0, 0.5], &[2, 6], 8.0).unwrap();
        for b in 0..2 {
            for l in 0..2 {
                assert!((r.lm_norm[b][l] - r.values[b][l][0]).abs() < 1e-12);
            }
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }
}
