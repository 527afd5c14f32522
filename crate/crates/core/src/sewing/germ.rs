use std::marker::PhantomData;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fbm::FbmPath;
use crate::rng;
use crate::scalar::Scalar;
use crate::sewing::value::Value;

/// A two-parameter process `A_{s,t}`: given a sample context and an interval,
/// produce a value. Implementations must satisfy `A_{s,s} = 0` and be
/// deterministic given the context.
pub trait Germ<T: Scalar> {
    /// Sample-path context (`()` for deterministic germs).
    type Ctx: ?Sized;
    type Output: Value<T>;

    fn eval(&self, ctx: &Self::Ctx, s: T, t: T) -> Result<Self::Output>;

    /// `E_s A_{s,t}`, for germs whose conditional law is known exactly.
    fn cond_mean(&self, _ctx: &Self::Ctx, _s: T, _t: T) -> Result<Self::Output> {
        Err(Error::UnsupportedOracle(self.name().to_string()))
    }

    /// Whether `A_{s,t}` depends on the context only up to time `t`.
    fn is_adapted(&self) -> bool {
        true
    }

    fn name(&self) -> &str;

    /// `delta A_{s,u,t} = A_{s,t} - A_{s,u} - A_{u,t}`.
    fn delta(&self, ctx: &Self::Ctx, s: T, u: T, t: T) -> Result<Self::Output> {
        if !(s <= u && u <= t) {
            return Err(Error::Domain(format!("delta needs s <= u <= t, got ({s}, {u}, {t})")));
        }
        let mut d = self.eval(ctx, s, t)?;
        d.acc_sub(&self.eval(ctx, s, u)?);
        d.acc_sub(&self.eval(ctx, u, t)?);
        Ok(d)
    }
}

/// The zero germ over any context.
pub struct ZeroGerm<C: ?Sized>(PhantomData<fn(&C)>);

impl<C: ?Sized> ZeroGerm<C> {
    pub fn new() -> Self {
        ZeroGerm(PhantomData)
    }
}

impl<C: ?Sized> Default for ZeroGerm<C> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar, C: ?Sized> Germ<T> for ZeroGerm<C> {
    type Ctx = C;
    type Output = T;
    fn eval(&self, _: &C, _: T, _: T) -> Result<T> {
        Ok(T::zero())
    }
    fn cond_mean(&self, _: &C, _: T, _: T) -> Result<T> {
        Ok(T::zero())
    }
    fn name(&self) -> &str {
        "zero"
    }
}

/// Germ given by a closure `(ctx, s, t) -> value`.
pub struct FnGerm<C: ?Sized, V, F> {
    f: F,
    name: String,
    _marker: PhantomData<fn(&C) -> V>,
}

impl<C: ?Sized, V, F> FnGerm<C, V, F> {
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnGerm { f, name: name.into(), _marker: PhantomData }
    }
}

impl<T, C, V, F> Germ<T> for FnGerm<C, V, F>
where
    T: Scalar,
    C: ?Sized,
    V: Value<T>,
    F: Fn(&C, T, T) -> V,
{
    type Ctx = C;
    type Output = V;
    fn eval(&self, ctx: &C, s: T, t: T) -> Result<V> {
        Ok((self.f)(ctx, s, t))
    }
    fn name(&self) -> &str {
        &self.name
    }
}

/// Young germ `A_{s,t} = f(s) (g(t) - g(s))`.
pub struct YoungGerm<F, G> {
    pub f: F,
    pub g: G,
}

impl<F, G> YoungGerm<F, G> {
    pub fn new(f: F, g: G) -> Self {
        YoungGerm { f, g }
    }
}

impl<T: Scalar, F: Fn(T) -> T, G: Fn(T) -> T> Germ<T> for YoungGerm<F, G> {
    type Ctx = ();
    type Output = T;
    fn eval(&self, _: &(), s: T, t: T) -> Result<T> {
        Ok((self.f)(s) * ((self.g)(t) - (self.g)(s)))
    }
    fn cond_mean(&self, ctx: &(), s: T, t: T) -> Result<T> {
        self.eval(ctx, s, t)
    }
    fn name(&self) -> &str {
        "young"
    }
}

/// Left-point Ito germ `B_s (B_t - B_s)` on one fBm coordinate.
#[derive(Clone, Copy, Debug, Default)]
pub struct ItoGerm {
    pub coord: usize,
}

impl<T: Scalar> Germ<T> for ItoGerm {
    type Ctx = FbmPath<T>;
    type Output = T;
    fn eval(&self, path: &FbmPath<T>, s: T, t: T) -> Result<T> {
        let bs = path.value_at(self.coord, s)?;
        Ok(bs * (path.value_at(self.coord, t)? - bs))
    }
    fn cond_mean(&self, path: &FbmPath<T>, s: T, t: T) -> Result<T> {
        let bs = path.value_at(self.coord, s)?;
        Ok(bs * (path.conditional_mean(self.coord, s, t)? - bs))
    }
    fn name(&self) -> &str {
        "ito"
    }
}

/// Increment germ `B_t - B_s`.
#[derive(Clone, Copy, Debug, Default)]
pub struct IncrementGerm {
    pub coord: usize,
}

impl<T: Scalar> Germ<T> for IncrementGerm {
    type Ctx = FbmPath<T>;
    type Output = T;
    fn eval(&self, path: &FbmPath<T>, s: T, t: T) -> Result<T> {
        Ok(path.value_at(self.coord, t)? - path.value_at(self.coord, s)?)
    }
    fn cond_mean(&self, path: &FbmPath<T>, s: T, t: T) -> Result<T> {
        Ok(path.conditional_mean(self.coord, s, t)? - path.value_at(self.coord, s)?)
    }
    fn name(&self) -> &str {
        "increment"
    }
}

/// `B_t^2 - B_s^2`, with the Gaussian oracle
/// `E_s B_t^2 = (E_s B_t)^2 + Var(B_t | F_s)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FbmSquareGerm {
    pub coord: usize,
}

impl<T: Scalar> Germ<T> for FbmSquareGerm {
    type Ctx = FbmPath<T>;
    type Output = T;
    fn eval(&self, path: &FbmPath<T>, s: T, t: T) -> Result<T> {
        let bs = path.value_at(self.coord, s)?;
        let bt = path.value_at(self.coord, t)?;
        Ok(bt * bt - bs * bs)
    }
    fn cond_mean(&self, path: &FbmPath<T>, s: T, t: T) -> Result<T> {
        let bs = path.value_at(self.coord, s)?;
        let m = path.conditional_mean(self.coord, s, t)?;
        Ok(m * m + path.residual_variance(s, t)? - bs * bs)
    }
    fn name(&self) -> &str {
        "fbm_square"
    }
}

/// Centred Gaussian germ with variance `(t-s)^exponent`, drawn independently
/// for every interval from the context seed.
#[derive(Clone, Copy, Debug)]
pub struct NoiseGerm {
    pub exponent: f64,
}

impl NoiseGerm {
    pub fn new(exponent: f64) -> Self {
        NoiseGerm { exponent }
    }
}

impl<T: Scalar> Germ<T> for NoiseGerm {
    type Ctx = u64;
    type Output = T;
    fn eval(&self, seed: &u64, s: T, t: T) -> Result<T> {
        if s == t {
            return Ok(T::zero());
        }
        let z: f64 = StandardNormal.sample(&mut rng::keyed(*seed, &[s.as_f64().to_bits(), t.as_f64().to_bits()]));
        Ok(T::lit((t - s).as_f64().powf(self.exponent / 2.0) * z))
    }
    fn cond_mean(&self, _: &u64, _: T, _: T) -> Result<T> {
        Ok(T::zero())
    }
    fn name(&self) -> &str {
        "noise"
    }
}

/// Germ read from a table over a fixed point set; `A_{t_i,t_j} = table[i][j]`.
#[derive(Clone, Debug)]
pub struct TableGerm<T> {
    points: Vec<T>,
    table: Vec<Vec<T>>,
}

impl<T: Scalar> TableGerm<T> {
    pub fn new(points: Vec<T>, table: Vec<Vec<T>>) -> Result<Self> {
        let n = points.len();
        if table.len() != n || table.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("table must be {n}x{n}")));
        }
        Ok(TableGerm { points, table })
    }

    fn index(&self, t: T) -> Result<usize> {
        self.points
            .iter()
            .position(|p| *p == t)
            .ok_or_else(|| Error::Domain(format!("time {t} is not a table point")))
    }
}

impl<T: Scalar> Germ<T> for TableGerm<T> {
    type Ctx = ();
    type Output = T;
    fn eval(&self, _: &(), s: T, t: T) -> Result<T> {
        if s == t {
            return Ok(T::zero());
        }
        Ok(self.table[self.index(s)?][self.index(t)?])
    }
    fn name(&self) -> &str {
        "custom-table"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        let add = FnGerm::new("additive", |_: &(), s: f64, t: f64| t.sin() - s.sin());
        for (s, u, t) in [(0.0, 0.3, 1.0), (0.2, 0.2, 0.7), (0.1, 0.5, 0.5)] {
            assert!(add.delta(&(), s, u, t).unwrap().abs() < 1e-15);
        }
        let sq = FnGerm::new("square", |_: &(), s: f64, t: f64| (t - s) * (t - s));
        assert_eq!(sq.delta(&(), 0.0, 1.0, 2.0).unwrap(), 2.0);
        assert!(sq.delta(&(), 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn young_delta_is_product_of_increments() {
        let f = |x: f64| x.cos();
        let g = |x: f64| x * x + x.exp();
        let y = YoungGerm::new(f, g);
        for (s, u, t) in [(0.0, 0.4, 1.0), (0.3, 0.31, 0.9), (0.5, 0.5, 0.8)] {
            let d = y.delta(&(), s, u, t).unwrap();
            let expect = -(f(u) - f(s)) * (g(t) - g(u));
            assert!((d - expect).abs() < 1e-14, "{d} vs {expect}");
        }
    }

    #[test]
    fn table_germ_lookup() {
        let g = TableGerm::new(vec![0.0, 0.5, 1.0], vec![vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 3.0], vec![0.0; 3]]).unwrap();
        assert_eq!(g.eval(&(), 0.5, 1.0).unwrap(), 3.0);
        assert_eq!(g.eval(&(), 0.5, 0.5).unwrap(), 0.0);
        assert!(g.eval(&(), 0.25, 1.0).is_err());
        assert!(matches!(Germ::<f64>::cond_mean(&g, &(), 0.0, 1.0), Err(Error::UnsupportedOracle(_))));
    }
}
