//! Allocation of a point set into the `w`-dyadic subintervals of its hull,
//! producing the four-point terms `R^h_i` whose sum equals the Riemann-sum
//! defect `sum_i A_{t_i,t_{i+1}} - A_{t_0,t_N}`.

use std::ops::{Add, Sub};

use num_traits::Zero;

use crate::control::Control;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Safety net on recursion depth; distinct floating-point points separate
/// long before this.
const MAX_ALLOCATION_DEPTH: u32 = 2048;

/// One non-zero term `R^h_i = A_{s1,s2} + A_{s2,s3} + A_{s3,s4} - A_{s1,s4}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationTerm<T, V> {
    pub level: u32,
    pub index: u64,
    /// The level-`h` dyadic interval `[d^h_i, d^h_{i+1}]` holding the points.
    pub interval: (T, T),
    /// Indices into the input point set of `s1 <= s2 <= s3 <= s4`.
    pub point_indices: [usize; 4],
    pub points: [T; 4],
    pub value: V,
}

struct Allocator<'a, T: Scalar, V, F> {
    points: &'a [T],
    control: &'a Control<T>,
    a: &'a F,
    terms: Vec<AllocationTerm<T, V>>,
}

impl<T, V, F> Allocator<'_, T, V, F>
where
    T: Scalar,
    V: Clone + Zero + Add<Output = V> + Sub<Output = V>,
    F: Fn(usize, usize) -> V,
{
    fn germ(&self, i: usize, j: usize) -> V {
        if i == j {
            V::zero()
        } else {
            (self.a)(i, j)
        }
    }

    /// `first..=last` are the indices of the points in the current interval.
    fn split(&mut self, level: u32, index: u64, lo: T, hi: T, first: usize, last: usize) -> Result<()> {
        if last <= first {
            return Ok(());
        }
        if level >= MAX_ALLOCATION_DEPTH {
            return Err(Error::Domain("allocation did not separate the points".into()));
        }
        let mid = self.control.split_point(lo, hi);
        // left child: points < mid
        let cut = first + self.points[first..=last].partition_point(|p| *p < mid);
        // a singleton on each side gives A_{s1,s4} - A_{s1,s4} = 0 identically
        let both_singletons = cut == first + 1 && cut == last;
        if cut > first && cut <= last && !both_singletons {
            let (s1, s2, s3, s4) = (first, cut - 1, cut, last);
            let value = self.germ(s1, s2) + self.germ(s2, s3) + self.germ(s3, s4) - self.germ(s1, s4);
            self.terms.push(AllocationTerm {
                level,
                index,
                interval: (lo, hi),
                point_indices: [s1, s2, s3, s4],
                points: [self.points[s1], self.points[s2], self.points[s3], self.points[s4]],
                value,
            });
        }
        if cut > first {
            self.split(level + 1, 2 * index, lo, mid, first, cut - 1)?;
        }
        if cut <= last {
            self.split(level + 1, 2 * index + 1, mid, hi, cut, last)?;
        }
        Ok(())
    }
}

/// All non-zero allocation terms for `points` (strictly increasing), with the
/// germ given on index pairs by `a(i, j)`, `i < j`.
pub fn allocate<T, V, F>(a: F, points: &[T], control: &Control<T>) -> Result<Vec<AllocationTerm<T, V>>>
where
    T: Scalar,
    V: Clone + Zero + Add<Output = V> + Sub<Output = V>,
    F: Fn(usize, usize) -> V,
{
    if points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidPartition("allocation points must be strictly increasing".into()));
    }
    if points.len() < 2 {
        return Ok(Vec::new());
    }
    let (lo, hi) = (points[0], points[points.len() - 1]);
    control.eval(lo, hi)?;
    let mut alloc = Allocator { points, control, a: &a, terms: Vec::new() };
    alloc.split(0, 0, lo, hi, 0, points.len() - 1)?;
    Ok(alloc.terms)
}

/// Both sides of the allocation identity: `(sum_i A_{t_i,t_{i+1}} - A_{t_0,t_N},
/// sum of all terms)`.
pub fn allocation_identity<T, V, F>(a: F, points: &[T], control: &Control<T>) -> Result<(V, V)>
where
    T: Scalar,
    V: Clone + Zero + Add<Output = V> + Sub<Output = V>,
    F: Fn(usize, usize) -> V,
{
    let terms = allocate(&a, points, control)?;
    let n = points.len();
    let mut lhs = V::zero();
    if n >= 2 {
        for i in 0..n - 1 {
            lhs = lhs + a(i, i + 1);
        }
        lhs = lhs - a(0, n - 1);
    }
    let rhs = terms.into_iter().fold(V::zero(), |acc, t| acc + t.value);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn two_points_give_nothing() {
        let c = Control::linear(1.0).unwrap();
        let terms = allocate(|_, _| 1.0f64, &[0.2, 0.7], &c).unwrap();
        assert!(terms.is_empty());
        let (l, r) = allocation_identity(|_, _| 1.0f64, &[0.2, 0.7], &c).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
    }

    #[test]
    fn three_points_single_term() {
        // points {0, 0.5, 2}, linear control on [0,2]: the first split at 1
        // separates {0, 0.5} from {2}.
        let c = Control::linear(2.0).unwrap();
        let pts = [0.0, 0.5, 2.0];
        let a = |i: usize, j: usize| {
            let (s, t): (f64, f64) = (pts[i], pts[j]);
            (t - s).powi(2) + s * t
        };
        let terms = allocate(a, &pts, &c).unwrap();
        assert_eq!(terms.len(), 1);
        let term = &terms[0];
        assert_eq!((term.level, term.index), (0, 0));
        let delta = a(0, 2) - a(0, 1) - a(1, 2);
        assert!((term.value + delta).abs() < 1e-14);
    }

    #[test]
    fn exact_with_rationals() {
        let c = Control::power(1.0, 2.0, 1.0).unwrap();
        let pts: Vec<f64> = (0..17).map(|k| (k as f64 / 16.0).powf(1.3)).collect();
        let a = |i: usize, j: usize| Rational64::new((3 * i * i + 7 * j + i * j) as i64 % 23 - 11, 1 + (i + j) as i64 % 5);
        let (lhs, rhs) = allocation_identity(a, &pts, &c).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn terms_lie_in_their_dyadic_interval() {
        let c = Control::linear(1.0).unwrap();
        let pts: Vec<f64> = vec![0.0, 0.01, 0.3, 0.31, 0.32, 0.8, 0.99];
        let terms = allocate(|i, j| (i * 10 + j) as f64, &pts, &c).unwrap();
        let tree = c.dyadic_tree(0.0, 0.99, 12).unwrap();
        for t in &terms {
            let lv = tree.level(t.level);
            let (lo, hi) = (lv[t.index as usize], lv[t.index as usize + 1]);
            assert_eq!((lo, hi), t.interval);
            assert!(t.points.iter().all(|p| *p >= lo && *p <= hi));
            assert!(t.points.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn rejects_unsorted_points() {
        let c = Control::linear(1.0).unwrap();
        assert!(allocate(|_, _| 0.0f64, &[0.5, 0.2], &c).is_err());
    }
}
