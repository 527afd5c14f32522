use crate::scalar::Scalar;

/// Values a germ can take: a normed vector space with in-place arithmetic.
pub trait Value<T: Scalar>: Clone + Send + Sync {
    /// Zero element of the same shape.
    fn zero_like(&self) -> Self;
    fn acc_add(&mut self, other: &Self);
    fn acc_sub(&mut self, other: &Self);
    fn scale_by(&mut self, a: T);
    fn norm(&self) -> T;

    fn distance(&self, other: &Self) -> T {
        let mut d = self.clone();
        d.acc_sub(other);
        d.norm()
    }
}

impl<T: Scalar> Value<T> for T {
    fn zero_like(&self) -> Self {
        T::zero()
    }
    fn acc_add(&mut self, other: &Self) {
        *self = *self + *other;
    }
    fn acc_sub(&mut self, other: &Self) {
        *self = *self - *other;
    }
    fn scale_by(&mut self, a: T) {
        *self = *self * a;
    }
    fn norm(&self) -> T {
        self.mag()
    }
}

/// Finite-dimensional vector carrying its `l^p` exponent (`p = inf` allowed).
#[derive(Clone, Debug, PartialEq)]
pub struct VecValue<T> {
    pub data: Vec<T>,
    pub p: T,
}

impl<T: Scalar> VecValue<T> {
    pub fn new(data: Vec<T>, p: T) -> Self {
        VecValue { data, p }
    }

    pub fn zeros(dim: usize, p: T) -> Self {
        VecValue { data: vec![T::zero(); dim], p }
    }
}

/// `l^p` norm of a slice, `p = inf` giving the max norm.
pub fn lp_norm<T: Scalar>(xs: &[T], p: T) -> T {
    if p.is_infinite() {
        return xs.iter().fold(T::zero(), |m, x| m.max(x.mag()));
    }
    if p == T::lit(2.0) {
        return xs.iter().fold(T::zero(), |a, x| a + *x * *x).sqrt();
    }
    xs.iter().fold(T::zero(), |a, x| a + x.mag().powf(p)).powf(T::one() / p)
}

impl<T: Scalar> Value<T> for VecValue<T> {
    fn zero_like(&self) -> Self {
        VecValue::zeros(self.data.len(), self.p)
    }
    fn acc_add(&mut self, other: &Self) {
        assert_eq!(self.data.len(), other.data.len(), "vector values of different dimension");
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a = *a + *b);
    }
    fn acc_sub(&mut self, other: &Self) {
        assert_eq!(self.data.len(), other.data.len(), "vector values of different dimension");
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a = *a - *b);
    }
    fn scale_by(&mut self, a: T) {
        self.data.iter_mut().for_each(|x| *x = *x * a);
    }
    fn norm(&self) -> T {
        lp_norm(&self.data, self.p)
    }
}
