//! Harmonic analysis on the periodic grid `[-L, L)^d`, `d in {1, 2}`: discrete
//! Fourier transforms, heat-kernel multipliers, Littlewood–Paley blocks, Besov
//! norms, and numerical checks of the Bernstein, heat-decay and
//! smoothing-gain estimates.

use std::io::{Read, Write};

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::sewing::value::Value;
use crate::stats;

/// Discretisation of `[-L, L)^d` with `n` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GridSpec<T> {
    pub dim: usize,
    pub half_period: T,
    pub n: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(dim: usize, half_period: T, n: usize) -> Result<Self> {
        let spec = GridSpec { dim, half_period, n };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return invalid(format!("grid dimension must be 1 or 2, got {}", self.dim));
        }
        if !self.n.is_power_of_two() || self.n < 2 {
            return invalid(format!("grid size must be a power of two >= 2, got {}", self.n));
        }
        if !(self.half_period > T::zero()) || !self.half_period.is_finite() {
            return invalid("grid half-period must be positive");
        }
        Ok(())
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> T {
        (self.half_period + self.half_period) / T::lit(self.n as f64)
    }

    /// Cell volume `dx^d`.
    pub fn cell(&self) -> T {
        self.dx().powi(self.dim as i32)
    }

    /// Volume `(2L)^d` of the torus.
    pub fn volume(&self) -> T {
        (self.half_period + self.half_period).powi(self.dim as i32)
    }

    /// Per-axis indices of flat index `idx` (second entry 0 when `d = 1`).
    pub fn axes(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    /// Coordinates of node `idx`.
    pub fn node(&self, idx: usize) -> [T; 2] {
        let [i, j] = self.axes(idx);
        let x = |k: usize| -self.half_period + self.dx() * T::lit(k as f64);
        if self.dim == 1 {
            [x(i), T::zero()]
        } else {
            [x(i), x(j)]
        }
    }

    /// Flat index of the node nearest to `x`, wrapping periodically.
    pub fn nearest_node(&self, x: &[T]) -> usize {
        let axis = |v: T| {
            let k = ((v + self.half_period) / self.dx()).round().to_i64().unwrap_or(0);
            k.rem_euclid(self.n as i64) as usize
        };
        if self.dim == 1 {
            axis(x[0])
        } else {
            axis(x[0]) * self.n + axis(x[1])
        }
    }

    /// Signed wave number of FFT bin `k` (the Nyquist bin is `-n/2`).
    pub fn wave_number(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Angular frequency vector `pi k / L` of flat FFT index `idx`.
    pub fn xi(&self, idx: usize) -> [T; 2] {
        let [i, j] = self.axes(idx);
        let f = |k: usize| T::PI() * T::lit(self.wave_number(k) as f64) / self.half_period;
        if self.dim == 1 {
            [f(i), T::zero()]
        } else {
            [f(i), f(j)]
        }
    }

    pub fn xi_table(&self) -> Vec<[T; 2]> {
        (0..self.len()).map(|i| self.xi(i)).collect()
    }

    pub fn xi_sq_table(&self) -> Vec<T> {
        self.xi_table().into_iter().map(|[a, b]| a * a + b * b).collect()
    }

    /// Largest axis frequency `pi n / (2L)`.
    pub fn nyquist(&self) -> T {
        T::PI() * T::lit((self.n / 2) as f64) / self.half_period
    }

    /// Largest `|xi|` on the grid.
    pub fn max_frequency(&self) -> T {
        self.nyquist() * T::lit(self.dim as f64).sqrt()
    }

    /// Smallest block index `J` whose low-pass symbol is 1 on every grid
    /// frequency, so that blocks `-1..=J` sum to the identity.
    pub fn j_max(&self) -> i32 {
        let top = self.max_frequency().as_f64();
        let mut j = -1;
        while 0.75 * 2f64.powi(j + 1) < top {
            j += 1;
        }
        j
    }

    /// FFT bin of a signed wave number, if it lies strictly below Nyquist.
    fn bin(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        (k.abs() < half).then(|| k.rem_euclid(self.n as i64) as usize)
    }
}

fn fft_axis<T: Scalar>(data: &mut [Complex<T>], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let plan = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    plan.process(data);
}

fn transpose<T: Copy>(data: &mut [T], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// In-place `d`-dimensional FFT; the inverse includes the `1/n^d` factor.
pub fn fft_nd<T: Scalar>(spec: &GridSpec<T>, data: &mut [Complex<T>], inverse: bool) {
    let n = spec.n;
    fft_axis(data, n, inverse);
    if spec.dim == 2 {
        transpose(data, n);
        fft_axis(data, n, inverse);
        transpose(data, n);
    }
    if inverse {
        let s = T::one() / T::lit(spec.len() as f64);
        data.iter_mut().for_each(|z| *z = z.scale(s));
    }
}

/// Low-pass symbol: 1 on `[0, 3/4]`, 0 on `[4/3, inf)`, smooth in between.
pub fn chi(r: f64) -> f64 {
    let bump = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let (a, b) = (bump(4.0 / 3.0 - r), bump(r - 0.75));
    if a + b == 0.0 {
        // unreachable for finite r, kept for NaN safety
        return 0.0;
    }
    a / (a + b)
}

/// Littlewood–Paley symbol of block `j >= -1` at frequency modulus `r`.
pub fn block_symbol(j: i32, r: f64) -> f64 {
    if j < 0 {
        chi(r)
    } else {
        chi(r / 2f64.powi(j + 1)) - chi(r / 2f64.powi(j))
    }
}

/// Besov indices `(alpha, p, q)`; `p`, `q` may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovIndices {
    pub alpha: f64,
    #[serde(with = "exponent")]
    pub p: f64,
    #[serde(with = "exponent")]
    pub q: f64,
}

impl BesovIndices {
    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        let b = BesovIndices { alpha, p, q };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) || !(self.q >= 1.0) {
            return invalid(format!("Besov indices need p, q >= 1, got p = {}, q = {}", self.p, self.q));
        }
        if !self.alpha.is_finite() {
            return invalid("Besov regularity must be finite");
        }
        Ok(())
    }
}

/// Serialises exponents in `[1, inf]` with infinity written as `"inf"`.
pub mod exponent {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                other => other.parse().map_err(serde::de::Error::custom),
            },
        }
    }
}

/// Complex samples of a function on the periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T: Scalar> {
    spec: GridSpec<T>,
    values: Vec<Complex<T>>,
}

/// Output of [`GridFunction::lp_block`].
#[derive(Clone, Debug)]
pub struct LpBlock<T: Scalar> {
    pub block: GridFunction<T>,
    /// The requested block lies beyond the grid's Nyquist range.
    pub beyond_nyquist: bool,
}

fn lp<T: Scalar>(values: &[Complex<T>], p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0f64, |m, z| m.max(z.norm().as_f64()));
    }
    if p == 2.0 {
        return (values.iter().map(|z| z.norm_sqr().as_f64()).sum::<f64>() * cell).sqrt();
    }
    (values.iter().map(|z| z.norm().as_f64().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

fn lq_sum(terms: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        terms.iter().fold(0.0f64, |m, v| m.max(*v))
    } else {
        terms.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(spec: GridSpec<T>, values: Vec<Complex<T>>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(Error::Shape(format!("grid of {} nodes given {} values", spec.len(), values.len())));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("grid function values must be finite");
        }
        Ok(GridFunction { spec, values })
    }

    pub fn zeros(spec: GridSpec<T>) -> Self {
        GridFunction { spec, values: vec![Complex::new(T::zero(), T::zero()); spec.len()] }
    }

    pub fn constant(spec: GridSpec<T>, c: T) -> Self {
        GridFunction { spec, values: vec![Complex::new(c, T::zero()); spec.len()] }
    }

    /// Samples `f` at the nodes.
    pub fn from_fn(spec: GridSpec<T>, mut f: impl FnMut([T; 2]) -> Complex<T>) -> Self {
        GridFunction { spec, values: (0..spec.len()).map(|i| f(spec.node(i))).collect() }
    }

    pub fn from_real_fn(spec: GridSpec<T>, mut f: impl FnMut([T; 2]) -> T) -> Self {
        Self::from_fn(spec, |x| Complex::new(f(x), T::zero()))
    }

    /// `e^{i lambda . x}` sampled at the nodes.
    pub fn plane_wave(spec: GridSpec<T>, lambda: [T; 2]) -> Self {
        Self::from_fn(spec, |x| {
            let ph = lambda[0] * x[0] + lambda[1] * x[1];
            Complex::new(ph.cos(), ph.sin())
        })
    }

    /// `e^{i pi k . x / L}` for integer wave numbers `k`.
    pub fn plane_wave_mode(spec: GridSpec<T>, k: [i64; 2]) -> Self {
        let s = T::PI() / spec.half_period;
        Self::plane_wave(spec, [s * T::lit(k[0] as f64), s * T::lit(k[1] as f64)])
    }

    /// Grid Dirac mass at the node nearest `x`: value `1/dx^d` there.
    pub fn dirac(spec: GridSpec<T>, x: [T; 2]) -> Self {
        let mut g = Self::zeros(spec);
        let idx = spec.nearest_node(&x[..spec.dim]);
        g.values[idx] = Complex::new(T::one() / spec.cell(), T::zero());
        g
    }

    /// Normalised Gaussian bump of width `sigma` centred at `x0`.
    pub fn gaussian_bump(spec: GridSpec<T>, sigma: T, x0: [T; 2]) -> Self {
        let two = T::lit(2.0);
        let norm = (two * T::PI() * sigma * sigma).powf(T::lit(spec.dim as f64) / two);
        Self::from_real_fn(spec, |x| {
            let r2 = (0..spec.dim).map(|a| (x[a] - x0[a]) * (x[a] - x0[a])).fold(T::zero(), |s, v| s + v);
            (-r2 / (two * sigma * sigma)).exp() / norm
        })
    }

    /// Trigonometric polynomial `sum_k c_k e^{i pi k . x / L}`, built through
    /// its spectrum. Every wave number must lie strictly below Nyquist.
    pub fn from_modes(spec: GridSpec<T>, modes: &[([i64; 2], Complex<T>)]) -> Result<Self> {
        let mut coeffs = vec![Complex::new(T::zero(), T::zero()); spec.len()];
        let total = T::lit(spec.len() as f64);
        for (k, c) in modes {
            let (Some(b0), Some(b1)) = (spec.bin(k[0]), if spec.dim == 2 { spec.bin(k[1]) } else { Some(0) }) else {
                return invalid(format!("mode {k:?} is not below the Nyquist frequency of a grid with n = {}", spec.n));
            };
            if spec.dim == 1 && k[1] != 0 {
                return invalid("one-dimensional modes must have a zero second wave number");
            }
            // nodes start at -L, where e^{i pi k x / L} = (-1)^k
            let sign = if (k[0] + k[1]).rem_euclid(2) == 0 { T::one() } else { -T::one() };
            let idx = if spec.dim == 1 { b0 } else { b0 * spec.n + b1 };
            coeffs[idx] = coeffs[idx] + c.scale(sign * total);
        }
        Ok(Self::from_spectrum(spec, coeffs))
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    /// Unnormalised forward DFT coefficients.
    pub fn spectrum(&self) -> Vec<Complex<T>> {
        let mut c = self.values.clone();
        fft_nd(&self.spec, &mut c, false);
        c
    }

    pub fn from_spectrum(spec: GridSpec<T>, mut coeffs: Vec<Complex<T>>) -> Self {
        fft_nd(&spec, &mut coeffs, true);
        GridFunction { spec, values: coeffs }
    }

    /// Applies the Fourier multiplier `m(xi)`.
    pub fn apply_multiplier(&self, m: impl Fn([T; 2]) -> Complex<T>) -> Self {
        let mut c = self.spectrum();
        for (i, z) in c.iter_mut().enumerate() {
            *z = *z * m(self.spec.xi(i));
        }
        Self::from_spectrum(self.spec, c)
    }

    fn apply_real_multiplier(&self, m: impl Fn([T; 2]) -> T) -> Self {
        let mut c = self.spectrum();
        for (i, z) in c.iter_mut().enumerate() {
            *z = z.scale(m(self.spec.xi(i)));
        }
        Self::from_spectrum(self.spec, c)
    }

    /// Convolution with the Gaussian density of covariance `kappa I`, i.e. the
    /// multiplier `e^{-kappa |xi|^2 / 2}`. `kappa = 0` returns a copy.
    pub fn heat_convolve(&self, kappa: T) -> Result<Self> {
        if !(kappa >= T::zero()) {
            return invalid(format!("heat convolution needs kappa >= 0, got {kappa}"));
        }
        if kappa == T::zero() {
            return Ok(self.clone());
        }
        let half = T::lit(0.5);
        Ok(self.apply_real_multiplier(|[a, b]| (-kappa * (a * a + b * b) * half).exp()))
    }

    /// `g(. + y)` through the phase `e^{i xi . y}`.
    pub fn shift(&self, y: [T; 2]) -> Self {
        if y[0] == T::zero() && y[1] == T::zero() {
            return self.clone();
        }
        let spec = self.spec;
        // the Nyquist bin keeps only the real part of its phase, so real data
        // stay real under off-grid shifts
        let axis = |a: usize| -> Vec<Complex<T>> {
            (0..spec.n)
                .map(|k| {
                    let ph = T::PI() * T::lit(spec.wave_number(k) as f64) / spec.half_period * y[a];
                    if 2 * k == spec.n {
                        Complex::new(ph.cos(), T::zero())
                    } else {
                        Complex::new(ph.cos(), ph.sin())
                    }
                })
                .collect()
        };
        let fx = axis(0);
        let fy = if spec.dim == 2 { axis(1) } else { Vec::new() };
        let mut c = self.spectrum();
        for (idx, z) in c.iter_mut().enumerate() {
            let [i, j] = spec.axes(idx);
            *z = *z * if spec.dim == 2 { fx[i] * fy[j] } else { fx[i] };
        }
        Self::from_spectrum(spec, c)
    }

    /// Littlewood–Paley block `Delta_j g`, `j >= -1`.
    pub fn lp_block(&self, j: i32) -> Result<LpBlock<T>> {
        if j < -1 {
            return invalid(format!("block index must be >= -1, got {j}"));
        }
        if j > self.spec.j_max() {
            return Ok(LpBlock { block: Self::zeros(self.spec), beyond_nyquist: true });
        }
        let block = self.apply_real_multiplier(|[a, b]| T::lit(block_symbol(j, (a * a + b * b).sqrt().as_f64())));
        Ok(LpBlock { block, beyond_nyquist: false })
    }

    /// Grid `L^p` norm `(sum |g|^p dx^d)^{1/p}`, max norm for `p = inf`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp(&self.values, p, self.spec.cell().as_f64())
    }

    /// Block norms `|Delta_j g|_{L^p}` for `j = -1..=j_max`.
    pub fn block_norms(&self, p: f64) -> Vec<f64> {
        let c = self.spectrum();
        let rs: Vec<f64> = self.spec.xi_sq_table().iter().map(|r| r.as_f64().sqrt()).collect();
        let cell = self.spec.cell().as_f64();
        (-1..=self.spec.j_max())
            .map(|j| {
                let mut b: Vec<Complex<T>> = c.iter().zip(&rs).map(|(z, r)| z.scale(T::lit(block_symbol(j, *r)))).collect();
                fft_nd(&self.spec, &mut b, true);
                lp(&b, p, cell)
            })
            .collect()
    }

    /// `(sum_j 2^{j alpha q} |Delta_j g|_{L^p}^q)^{1/q}` over `j = -1..=j_max`.
    pub fn besov_norm(&self, b: &BesovIndices) -> Result<f64> {
        b.validate()?;
        Ok(besov_from_blocks(&self.block_norms(b.p), b.alpha, b.q))
    }

    /// Average of the values over the grid (the zeroth Fourier mode).
    pub fn mean(&self) -> Complex<T> {
        let s = self.values.iter().fold(Complex::new(T::zero(), T::zero()), |a, z| a + z);
        s.scale(T::one() / T::lit(self.spec.len() as f64))
    }

    /// Grid pairing `sum g h dx^d` (bilinear, no conjugation).
    pub fn pairing(&self, other: &Self) -> Result<Complex<T>> {
        self.check_same_grid(other)?;
        let s = self.values.iter().zip(&other.values).fold(Complex::new(T::zero(), T::zero()), |a, (x, y)| a + x * y);
        Ok(s.scale(self.spec.cell()))
    }

    /// Value at the node nearest `x`.
    pub fn sample(&self, x: [T; 2]) -> Complex<T> {
        self.values[self.spec.nearest_node(&x[..self.spec.dim])]
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Shape("grid functions live on different grids".into()));
        }
        Ok(())
    }

    /// Linear combination `a self + b other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x.scale(a) + y.scale(b)).collect();
        Ok(GridFunction { spec: self.spec, values })
    }

    /// Binary layout, little endian: `u32 d, u32 n, f64 L`, then `n^d` pairs of
    /// `f32` (real, imaginary).
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.spec.dim as u32).to_le_bytes())?;
        out.write_all(&(self.spec.n as u32).to_le_bytes())?;
        out.write_all(&self.spec.half_period.as_f64().to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for z in &self.values {
            buf.extend_from_slice(&(z.re.as_f64() as f32).to_le_bytes());
            buf.extend_from_slice(&(z.im.as_f64() as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut w4 = [0u8; 4];
        let mut w8 = [0u8; 8];
        input.read_exact(&mut w4)?;
        let dim = u32::from_le_bytes(w4) as usize;
        input.read_exact(&mut w4)?;
        let n = u32::from_le_bytes(w4) as usize;
        input.read_exact(&mut w8)?;
        let spec = GridSpec::new(dim, T::lit(f64::from_le_bytes(w8)), n)?;
        let mut payload = vec![0u8; 8 * spec.len()];
        input.read_exact(&mut payload)?;
        let values = payload
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex::new(T::lit(re as f64), T::lit(im as f64))
            })
            .collect();
        Self::new(spec, values)
    }

    /// CSV `x,re,im` for one-dimensional grids.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.spec.dim != 1 {
            return invalid("CSV export is only defined for one-dimensional grids");
        }
        writeln!(out, "x,re,im")?;
        for (i, z) in self.values.iter().enumerate() {
            writeln!(out, "{:e},{:e},{:e}", self.spec.node(i)[0].as_f64(), z.re.as_f64(), z.im.as_f64())?;
        }
        Ok(())
    }
}

/// Besov norm from block norms indexed from `j = -1`.
pub fn besov_from_blocks(block_norms: &[f64], alpha: f64, q: f64) -> f64 {
    let weighted: Vec<f64> = block_norms.iter().enumerate().map(|(k, v)| 2f64.powf((k as f64 - 1.0) * alpha) * v).collect();
    lq_sum(&weighted, q)
}

impl<T: Scalar> Value<T> for GridFunction<T> {
    fn zero_like(&self) -> Self {
        Self::zeros(self.spec)
    }
    fn acc_add(&mut self, other: &Self) {
        assert_eq!(self.spec, other.spec, "grid functions on different grids");
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a = *a + b);
    }
    fn acc_sub(&mut self, other: &Self) {
        assert_eq!(self.spec, other.spec, "grid functions on different grids");
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a = *a - b);
    }
    fn scale_by(&mut self, a: T) {
        self.values.iter_mut().for_each(|z| *z = z.scale(a));
    }
    /// Grid `L^2` norm.
    fn norm(&self) -> T {
        T::lit(self.lp_norm(2.0))
    }
}

/// Random trigonometric polynomials given by integer wave numbers, independent
/// of the grid they are later sampled on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    pub dim: usize,
    pub half_period: f64,
    pub modes: Vec<([i64; 2], Complex<f64>)>,
}

impl ModeSet {
    /// Every wave number with `lo <= |xi| < hi`, given an independent complex
    /// Gaussian coefficient scaled by `amplitude(|xi|)`.
    pub fn annulus(dim: usize, half_period: f64, lo: f64, hi: f64, seed: u64, amplitude: impl Fn(f64) -> f64) -> Self {
        let unit = std::f64::consts::PI / half_period;
        let kmax = (hi / unit).ceil() as i64;
        let mut r = rng::stream(seed, 0);
        let mut modes = Vec::new();
        let range2 = if dim == 2 { -kmax..=kmax } else { 0..=0 };
        for k0 in -kmax..=kmax {
            for k1 in range2.clone() {
                let xi = unit * ((k0 * k0 + k1 * k1) as f64).sqrt();
                if xi >= lo && xi < hi {
                    let a = amplitude(xi);
                    let re: f64 = r.sample(StandardNormal);
                    let im: f64 = r.sample(StandardNormal);
                    modes.push(([k0, k1], Complex::new(a * re, a * im)));
                }
            }
        }
        ModeSet { dim, half_period, modes }
    }

    /// Random multi-block function: annuli `[2^j, 2^{j+1})` for the given `j`
    /// with block amplitude `2^{-j alpha}`.
    pub fn random_blocks(dim: usize, half_period: f64, blocks: &[i32], alpha: f64, seed: u64) -> Self {
        let mut modes = Vec::new();
        for (b, &j) in blocks.iter().enumerate() {
            let lo = if j < 0 { 0.0 } else { 2f64.powi(j) };
            let part = Self::annulus(dim, half_period, lo, 2f64.powi(j + 1), rng::derive(seed, &[b as u64]), |_| 2f64.powf(-(j as f64) * alpha));
            modes.extend(part.modes);
        }
        ModeSet { dim, half_period, modes }
    }

    /// Largest `|xi|` among the modes.
    pub fn max_frequency(&self) -> f64 {
        let unit = std::f64::consts::PI / self.half_period;
        self.modes.iter().map(|(k, _)| unit * ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()).fold(0.0, f64::max)
    }

    pub fn to_grid<T: Scalar>(&self, spec: GridSpec<T>) -> Result<GridFunction<T>> {
        if spec.dim != self.dim || (spec.half_period.as_f64() - self.half_period).abs() > 1e-12 * self.half_period {
            return Err(Error::Shape("mode set and grid disagree on dimension or period".into()));
        }
        let modes: Vec<([i64; 2], Complex<T>)> = self.modes.iter().map(|(k, c)| (*k, Complex::new(T::lit(c.re), T::lit(c.im)))).collect();
        GridFunction::from_modes(spec, &modes)
    }
}

/// `|nabla^k g|`: pointwise Frobenius norm of the order-`k` derivative tensor.
pub fn gradient_modulus<T: Scalar>(g: &GridFunction<T>, k: u32) -> GridFunction<T> {
    let spec = *g.spec();
    if k == 0 {
        let values = g.values().iter().map(|z| Complex::new(z.norm(), T::zero())).collect();
        return GridFunction { spec, values };
    }
    let c = g.spectrum();
    let mut sq = vec![T::zero(); spec.len()];
    let combos = spec.dim.pow(k);
    for combo in 0..combos {
        let mut dirs = Vec::with_capacity(k as usize);
        let mut rest = combo;
        for _ in 0..k {
            dirs.push(rest % spec.dim);
            rest /= spec.dim;
        }
        let mut d: Vec<Complex<T>> = c
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let xi = spec.xi(i);
                dirs.iter().fold(*z, |acc, &a| acc * Complex::new(T::zero(), xi[a]))
            })
            .collect();
        fft_nd(&spec, &mut d, true);
        sq.iter_mut().zip(&d).for_each(|(s, z)| *s = *s + z.norm_sqr());
    }
    GridFunction { spec, values: sq.into_iter().map(|s| Complex::new(s.sqrt(), T::zero())).collect() }
}

/// `|nabla^k g|_{L^q} / (lambda^{k + d(1/p - 1/q)} |g|_{L^p})`.
pub fn bernstein_ratio<T: Scalar>(g: &GridFunction<T>, lambda: f64, k: u32, p: f64, q: f64) -> f64 {
    let d = g.spec().dim as f64;
    let expo = k as f64 + d * (1.0 / p - 1.0 / q);
    gradient_modulus(g, k).lp_norm(q) / (lambda.powf(expo) * g.lp_norm(p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub lambda: f64,
    pub k: u32,
    pub p: f64,
    pub q: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Bernstein ratios over random functions with spectrum in the ball
/// `|xi| <= lambda`. Coefficients have the radial profile `(1 - |xi|/lambda)`,
/// so the ensembles for different `lambda` are dilations of one another.
pub fn bernstein_check<T: Scalar>(spec: GridSpec<T>, lambda: f64, k: u32, p: f64, q: f64, trials: usize, seed: u64) -> Result<BernsteinReport> {
    if !(lambda > 0.0) || lambda >= spec.nyquist().as_f64() {
        return invalid(format!("Bernstein scale {lambda} must lie in (0, Nyquist)"));
    }
    if !(p >= 1.0 && p <= q) {
        return invalid(format!("Bernstein check needs 1 <= p <= q, got p = {p}, q = {q}"));
    }
    let ratios = (0..trials)
        .map(|t| {
            let modes = ModeSet::annulus(spec.dim, spec.half_period.as_f64(), 0.0, lambda, rng::derive(seed, &[t as u64]), |r| 1.0 - r / lambda);
            Ok(bernstein_ratio(&modes.to_grid(spec)?, lambda, k, p, q))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_ratio = ratios.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(BernsteinReport { lambda, k, p, q, ratios, max_ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatDecayReport {
    pub lambda: f64,
    /// Abscissae `kappa lambda^2`.
    pub kappa_lambda_sq: Vec<f64>,
    /// Largest `|P_kappa g|_p / |g|_p` over the ensemble at each `kappa`.
    pub ratios: Vec<f64>,
    /// Minus the slope of `log ratio` against `kappa lambda^2`.
    pub c_hat: f64,
    /// `exp` of the fitted intercept.
    pub big_c_hat: f64,
}

/// Fits `|P_kappa g|_p / |g|_p ~ C e^{-c kappa lambda^2}` over an ensemble.
pub fn heat_decay_fit<T: Scalar>(ensemble: &[GridFunction<T>], lambda: f64, kappas: &[f64], p: f64) -> Result<HeatDecayReport> {
    if ensemble.is_empty() || kappas.len() < 2 {
        return Err(Error::DegenerateFit("heat decay fit needs functions and at least two kappas".into()));
    }
    let mut ratios = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let mut worst = 0.0f64;
        for g in ensemble {
            let r = g.heat_convolve(T::lit(kappa))?.lp_norm(p) / g.lp_norm(p);
            worst = worst.max(r);
        }
        ratios.push(worst);
    }
    let xs: Vec<f64> = kappas.iter().map(|k| k * lambda * lambda).collect();
    let ys: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let fit = stats::least_squares(&xs, &ys)?;
    Ok(HeatDecayReport { lambda, kappa_lambda_sq: xs, ratios, c_hat: -fit.slope, big_c_hat: fit.intercept.exp() })
}

/// Heat decay over functions `Delta_j(noise)` whose spectrum lies in the block
/// annulus around `lambda = 2^j`.
pub fn heat_decay_check<T: Scalar>(spec: GridSpec<T>, j: i32, kappas: &[f64], p: f64, trials: usize, seed: u64) -> Result<HeatDecayReport> {
    if j < 0 || j >= spec.j_max() {
        return invalid(format!("annulus index {j} must lie in [0, {})", spec.j_max()));
    }
    let lambda = 2f64.powi(j);
    let ensemble = (0..trials)
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let noise = GridFunction::from_real_fn(spec, |_| T::lit(r.sample::<f64, _>(StandardNormal)));
            Ok(noise.lp_block(j)?.block)
        })
        .collect::<Result<Vec<_>>>()?;
    heat_decay_fit(&ensemble, lambda, kappas, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PagReport {
    pub kappas: Vec<f64>,
    pub stats: Vec<f64>,
    pub sup_stat: f64,
}

/// `sup_kappa |P_kappa g|_{B^{alpha+gamma}_{p,q}} / ((1 + kappa^{-gamma/2}) |g|_{B^alpha_{p,inf}})`.
pub fn pag_check<T: Scalar>(g: &GridFunction<T>, alpha: f64, gamma: f64, p: f64, q: f64, kappas: &[f64]) -> Result<PagReport> {
    if !(gamma > 0.0) {
        return invalid(format!("smoothing gain needs gamma > 0, got {gamma}"));
    }
    if kappas.iter().any(|k| !(*k > 0.0)) {
        return invalid("smoothing gain needs positive kappas");
    }
    let denom_norm = g.besov_norm(&BesovIndices::new(alpha, p, f64::INFINITY)?)?;
    let target = BesovIndices::new(alpha + gamma, p, q)?;
    let mut stats = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let num = g.heat_convolve(T::lit(kappa))?.besov_norm(&target)?;
        let den = (1.0 + kappa.powf(-gamma / 2.0)) * denom_norm;
        stats.push(if den == 0.0 { 0.0 } else { num / den });
    }
    let sup_stat = stats.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(PagReport { kappas: kappas.to_vec(), stats, sup_stat })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize) -> GridSpec<f64> {
        GridSpec::new(1, 8.0, n).unwrap()
    }

    fn max_diff(a: &GridFunction<f64>, b: &GridFunction<f64>) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_geometry() {
        let s = grid1(16);
        assert_eq!(s.dx(), 1.0);
        assert_eq!(s.node(0)[0], -8.0);
        assert_eq!(s.wave_number(8), -8);
        assert_eq!(s.nearest_node(&[0.0]), 8);
        assert_eq!(s.nearest_node(&[8.0]), 0);
        assert!(GridSpec::new(3, 1.0, 16).is_err());
        assert!(GridSpec::new(1, 1.0, 12).is_err());
        let s2 = GridSpec::new(2, 1.0, 8).unwrap();
        assert_eq!(s2.len(), 64);
        assert_eq!(s2.axes(13), [1, 5]);
    }

    #[test]
    fn round_trip() {
        for spec in [grid1(1 << 14), GridSpec::new(2, 3.0, 64).unwrap()] {
            let g = GridFunction::from_fn(spec, |x| Complex::new((x[0] * 1.3).sin() + x[1], (x[0] * x[1]).cos()));
            let back = GridFunction::from_spectrum(spec, g.spectrum());
            let scale = g.lp_norm(f64::INFINITY);
            assert!(max_diff(&g, &back) <= 1e-12 * scale);
        }
    }

    #[test]
    fn symbols_partition_unity() {
        for spec in [grid1(1024), GridSpec::new(2, 4.0, 128).unwrap()] {
            let jm = spec.j_max();
            for xi in spec.xi_table() {
                let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
                let s: f64 = (-1..=jm).map(|j| block_symbol(j, r)).sum();
                assert!((s - 1.0).abs() < 1e-12, "r = {r}: {s}");
            }
        }
        assert_eq!(chi(0.5), 1.0);
        assert_eq!(chi(2.0), 0.0);
        assert!(chi(1.0) > 0.0 && chi(1.0) < 1.0);
    }

    #[test]
    fn heat_plane_wave_amplitude() {
        let spec = grid1(256);
        let g = GridFunction::plane_wave_mode(spec, [5, 0]);
        let lam = std::f64::consts::PI * 5.0 / 8.0;
        let h = g.heat_convolve(0.3).unwrap();
        let expect = (-0.3 * lam * lam / 2.0).exp();
        for (a, b) in h.values().iter().zip(g.values()) {
            assert!((a - b.scale(expect)).norm() < 1e-12);
        }
        assert_eq!(g.heat_convolve(0.0).unwrap(), g);
        assert!(g.heat_convolve(-1.0).is_err());
    }

    #[test]
    fn heat_of_dirac_is_gaussian_density() {
        let spec = GridSpec::<f64>::new(1, 20.0, 1024).unwrap();
        let d = GridFunction::dirac(spec, [0.0, 0.0]);
        let h = d.heat_convolve(1.0).unwrap();
        for i in (0..spec.n).step_by(7) {
            let x = spec.node(i)[0];
            let dens = (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((h.values()[i].re - dens).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn heat_semigroup() {
        let spec = GridSpec::<f64>::new(2, 4.0, 64).unwrap();
        let g = GridFunction::from_real_fn(spec, |x| (x[0] * 2.0).sin() * (-x[1] * x[1]).exp());
        let a = g.heat_convolve(0.1).unwrap().heat_convolve(0.25).unwrap();
        let b = g.heat_convolve(0.35).unwrap();
        assert!(max_diff(&a, &b) <= 1e-10 * b.lp_norm(f64::INFINITY));
    }

    #[test]
    fn blocks_sum_to_identity() {
        let spec = grid1(512);
        let g = GridFunction::from_real_fn(spec, |x| (-x[0] * x[0]).exp() + (x[0] * 7.0).cos());
        let mut acc = GridFunction::zeros(spec);
        for j in -1..=spec.j_max() {
            acc.acc_add(&g.lp_block(j).unwrap().block);
        }
        assert!(max_diff(&acc, &g) <= 1e-10 * g.lp_norm(f64::INFINITY));
        let beyond = g.lp_block(spec.j_max() + 1).unwrap();
        assert!(beyond.beyond_nyquist);
        assert_eq!(beyond.block.lp_norm(2.0), 0.0);
    }

    #[test]
    fn constant_lives_in_low_block() {
        let spec = grid1(128);
        let g = GridFunction::constant(spec, 2.0);
        let norms = g.block_norms(2.0);
        assert!((norms[0] - g.lp_norm(2.0)).abs() < 1e-12);
        assert!(norms[1..].iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn plane_wave_blocks() {
        let spec = GridSpec::new(1, std::f64::consts::PI, 1024).unwrap();
        // xi = k exactly when L = pi
        for j in 0..6 {
            let k = (1.5 * 2f64.powi(j)).round() as i64;
            let g = GridFunction::plane_wave_mode(spec, [k, 0]);
            let norms = g.block_norms(2.0);
            for (idx, v) in norms.iter().enumerate() {
                let jj = idx as i32 - 1;
                if (jj - j).abs() > 1 {
                    assert!(*v < 1e-10, "block {jj} of wave {k}");
                }
            }
            let b = BesovIndices::new(0.7, 2.0, 2.0).unwrap();
            let ratio = g.besov_norm(&b).unwrap() / (2f64.powf(j as f64 * 0.7) * (2.0 * spec.half_period).sqrt());
            assert!((0.5..=2.0).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn shift_examples() {
        let spec = grid1(256);
        let g = GridFunction::from_real_fn(spec, |x| (-(x[0] - 1.0).powi(2)).exp());
        assert_eq!(g.shift([0.0, 0.0]), g);
        let w = GridFunction::plane_wave_mode(spec, [3, 0]);
        let ws = w.shift([0.37, 0.0]);
        assert!(ws.values().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let b = BesovIndices::new(-0.5, 2.0, 2.0).unwrap();
        let n0 = g.besov_norm(&b).unwrap();
        let n1 = g.shift([1.234, 0.0]).besov_norm(&b).unwrap();
        assert!((n0 - n1).abs() <= 1e-10 * n0);
        // shifting by a whole number of cells moves the samples
        let dx = spec.dx();
        let gs = g.shift([3.0 * dx, 0.0]);
        assert!((gs.values()[10] - g.values()[13]).norm() < 1e-12);
        let rough = GridFunction::from_real_fn(spec, |x| if x[0].abs() < 0.5 { 1.0 } else { 0.0 });
        assert!(rough.shift([0.123, 0.0]).values().iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn zero_function_norms() {
        let spec = grid1(64);
        let z = GridFunction::zeros(spec);
        assert_eq!(z.besov_norm(&BesovIndices::new(1.0, 2.0, 2.0).unwrap()).unwrap(), 0.0);
        let rep = pag_check(&z, 0.0, 1.0, 2.0, 2.0, &[0.1, 1.0]).unwrap();
        assert_eq!(rep.sup_stat, 0.0);
    }

    #[test]
    fn dirac_besov_stable_under_refinement() {
        let b = BesovIndices::new(-0.5, 2.0, 2.0).unwrap();
        let norms: Vec<f64> = [256, 512, 1024]
            .iter()
            .map(|&n| GridFunction::dirac(GridSpec::new(1, 4.0, n).unwrap(), [0.0, 0.0]).besov_norm(&b).unwrap())
            .collect();
        // the B^{-1/2}_{2,2} norm of the Dirac grows like sqrt(log n)
        assert!(norms[2] / norms[1] < 1.1 && norms[1] / norms[0] < 1.1, "{norms:?}");
    }

    #[test]
    fn from_modes_matches_direct_sampling() {
        let spec = GridSpec::new(2, 2.0, 32).unwrap();
        let modes = vec![([3i64, -2i64], Complex::new(0.5, 0.25)), ([0, 5], Complex::new(-1.0, 0.0))];
        let g = GridFunction::from_modes(spec, &modes).unwrap();
        let s = std::f64::consts::PI / 2.0;
        let direct = GridFunction::from_fn(spec, |x| {
            modes.iter().fold(Complex::new(0.0, 0.0), |a, (k, c)| {
                let ph = s * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
                a + c * Complex::new(ph.cos(), ph.sin())
            })
        });
        assert!(max_diff(&g, &direct) < 1e-12);
        assert!(GridFunction::from_modes(spec, &[([16, 0], Complex::new(1.0, 0.0))]).is_err());
    }

    #[test]
    fn bernstein_examples() {
        let spec = grid1(512);
        let g = GridFunction::from_real_fn(spec, |x| (x[0]).sin() + 0.3);
        assert!((bernstein_ratio(&g, 3.0, 0, 2.0, 2.0) - 1.0).abs() < 1e-12);
        let w = GridFunction::plane_wave_mode(spec, [6, 0]);
        let lam = std::f64::consts::PI * 6.0 / 8.0;
        assert!((bernstein_ratio(&w, 4.0, 1, 2.0, 2.0) - lam / 4.0).abs() < 1e-10);
        let r1 = bernstein_check(spec, 4.0, 1, 2.0, 2.0, 8, 1).unwrap();
        assert!(r1.max_ratio <= 1.0 + 1e-12);
        assert!(bernstein_check(spec, 1e3, 1, 2.0, 2.0, 1, 1).is_err());
    }

    #[test]
    fn heat_decay_plane_wave_rate() {
        let spec = grid1(256);
        let w = GridFunction::plane_wave_mode(spec, [8, 0]);
        let lam = std::f64::consts::PI;
        let rep = heat_decay_fit(&[w], lam, &[0.0, 0.1, 0.2, 0.4], 2.0).unwrap();
        assert!((rep.c_hat - 0.5).abs() < 1e-9);
        assert!((rep.ratios[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heat_decay_block_ensemble() {
        let spec = GridSpec::new(1, 16.0, 1024).unwrap();
        let kappas: Vec<f64> = (0..6).map(|i| 0.5 * i as f64 / 16.0).collect();
        let rep = heat_decay_check(spec, 4, &kappas, 2.0, 4, 3).unwrap();
        assert!(rep.c_hat > 0.25 && rep.c_hat < 1.0, "{}", rep.c_hat);
    }

    #[test]
    fn binary_and_csv_io() {
        let spec = grid1(32);
        let g = GridFunction::from_fn(spec, |x| Complex::new(x[0], -x[0] * 0.5));
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 32);
        let back = GridFunction::<f64>::read_binary(&buf[..]).unwrap();
        assert_eq!(back.spec(), g.spec());
        assert!(max_diff(&back, &g) < 1e-5);
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 33);
        assert!(GridFunction::zeros(GridSpec::new(2, 1.0, 4).unwrap()).write_csv(Vec::new()).is_err());
    }

    #[test]
    fn exponent_serde() {
        let b = BesovIndices::new(-0.5, 2.0, f64::INFINITY).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert!(s.contains("\"inf\""));
        let back: BesovIndices = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn single_precision_round_trip() {
        let spec = GridSpec::<f32>::new(1, 4.0, 256).unwrap();
        let g = GridFunction::from_real_fn(spec, |x| (x[0] * 2.0).cos());
        let h = g.heat_convolve(0.1).unwrap();
        assert!(h.lp_norm(2.0) < g.lp_norm(2.0));
    }
}
