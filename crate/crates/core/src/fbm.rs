//! Fractional Brownian motion from the Mandelbrot–Van Ness representation
//! `B_u = int_{-inf}^u ((u-r)_+^{H-1/2} - (-r)_+^{H-1/2}) dW_r`, discretised on
//! a uniform grid so that conditional means given the past are exact sums over
//! the stored Wiener increments.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::fft::convolve;
use crate::rng;
use crate::scalar::Scalar;

/// Parameters of a simulated fBm. `past = None` truncates the integral at
/// `-8 T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FbmParams<T> {
    pub hurst: T,
    pub dim: usize,
    pub horizon: T,
    /// Number of grid steps on `[0, horizon]`.
    pub steps: usize,
    #[serde(default)]
    pub past: Option<T>,
}

impl<T: Scalar> FbmParams<T> {
    pub fn new(hurst: T, dim: usize, horizon: T, steps: usize) -> Self {
        FbmParams { hurst, dim, horizon, steps, past: None }
    }

    pub fn with_past(mut self, past: T) -> Self {
        self.past = Some(past);
        self
    }

    pub fn dt(&self) -> T {
        self.horizon / T::lit(self.steps as f64)
    }

    pub fn past_length(&self) -> T {
        self.past.unwrap_or(self.horizon * T::lit(8.0))
    }

    /// Number of grid cells on `[-past, 0]`.
    pub fn past_cells(&self) -> Result<usize> {
        let dt = self.dt().as_f64();
        let past = self.past_length().as_f64();
        if !(past > dt) {
            return invalid(format!("past truncation {past} must exceed the grid step {dt}"));
        }
        Ok((past / dt).round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hurst.as_f64();
        if !(h > 0.0 && h < 1.0) {
            return invalid(format!("Hurst exponent must lie in (0,1), got {h}"));
        }
        if self.dim == 0 {
            return invalid("fBm needs at least one coordinate");
        }
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return invalid("fBm horizon must be positive");
        }
        if self.steps == 0 {
            return invalid("fBm grid needs at least one step");
        }
        self.past_cells().map(|_| ())
    }
}

/// `rho(u,v) = (v-u)^{2H} / (2H)`, the variance of `B_v` given the past at `u`.
pub fn rho<T: Scalar>(hurst: T, u: T, v: T) -> Result<T> {
    if !(u <= v) {
        return domain(format!("rho needs u <= v, got ({u}, {v})"));
    }
    let two_h = hurst + hurst;
    Ok((v - u).powf(two_h) / two_h)
}

/// `Var(B_1)` for the unnormalised kernel:
/// `Gamma(H+1/2)^2 / (Gamma(2H+1) sin(pi H))`.
pub fn mvn_variance_constant(hurst: f64) -> f64 {
    libm::tgamma(hurst + 0.5).powi(2) / (libm::tgamma(2.0 * hurst + 1.0) * (std::f64::consts::PI * hurst).sin())
}

/// Discretised kernel shared by all paths of one parameter set.
struct Kernel {
    hurst: f64,
    dt: f64,
    steps: usize,
    past_cells: usize,
    /// Weight of the cell at distance `j` cells behind the evaluation time,
    /// `j = 1..=steps` (`near[0] = 0`): the root mean square of
    /// `(v-r)^{H-1/2}` over the cell, so that the residual variance is
    /// exactly `rho`.
    near: Vec<f64>,
    /// Spectrum of the past-cell kernel, `None` when `H = 1/2`.
    far: Option<FarKernel>,
}

struct FarKernel {
    spectrum: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `dt^{H-1/2}`.
    scale: f64,
}

/// Cell average of `x^a` over `[m-1, m]`.
fn cell_average(a: f64, m: f64) -> f64 {
    (m.powf(a + 1.0) - (m - 1.0).powf(a + 1.0)) / (a + 1.0)
}

impl Kernel {
    fn new(hurst: f64, dt: f64, steps: usize, past_cells: usize) -> Self {
        let two_h = 2.0 * hurst;
        let mut near = vec![0.0; steps + 1];
        for (j, w) in near.iter_mut().enumerate().skip(1) {
            let j = j as f64;
            *w = (dt.powf(two_h - 1.0) * (j.powf(two_h) - (j - 1.0).powf(two_h)) / two_h).sqrt();
        }
        let far = (hurst != 0.5).then(|| {
            let a = hurst - 0.5;
            let k = past_cells;
            let len = (steps + 2 * k).next_power_of_two();
            let mut planner = FftPlanner::<f64>::new();
            let fwd = planner.plan_fft_forward(len);
            let inv = planner.plan_fft_inverse(len);
            let mut spectrum = vec![Complex::new(0.0, 0.0); len];
            for (m, z) in spectrum.iter_mut().enumerate().take(steps + k + 1).skip(1) {
                z.re = cell_average(a, m as f64);
            }
            fwd.process(&mut spectrum);
            FarKernel { spectrum, fwd, inv, scale: dt.powf(a) }
        });
        Kernel { hurst, dt, steps, past_cells, near, far }
    }

    /// Past contribution `X_i`, `i = 0..=steps`, from the past increments
    /// (stored oldest first).
    fn past_part(&self, past: &[f64]) -> Vec<f64> {
        let Some(far) = &self.far else {
            return vec![0.0; self.steps + 1];
        };
        let k = self.past_cells;
        // C_i = sum_l P(i+l) dW_{-l}; with the increments stored oldest first
        // this is the linear convolution of P with them, read at i + k.
        let len = far.spectrum.len();
        let mut buf: Vec<Complex<f64>> = past.iter().map(|x| Complex::new(*x, 0.0)).collect();
        buf.resize(len, Complex::new(0.0, 0.0));
        far.fwd.process(&mut buf);
        buf.iter_mut().zip(&far.spectrum).for_each(|(x, y)| *x *= y);
        far.inv.process(&mut buf);
        let norm = 1.0 / len as f64;
        let c0 = buf[k].re * norm;
        let mut out: Vec<f64> = (0..=self.steps).map(|i| far.scale * (buf[i + k].re * norm - c0)).collect();
        out[0] = 0.0;
        out
    }

    /// Exact variance of the discretised `B` at grid index `i` with `cells`
    /// past cells.
    fn grid_variance(&self, i: usize, cells: usize) -> f64 {
        let near: f64 = self.near[1..=i].iter().map(|w| w * w).sum();
        let a = self.hurst - 0.5;
        let far: f64 = if self.hurst == 0.5 {
            0.0
        } else {
            let s = self.dt.powf(a);
            (1..=cells).map(|l| (s * (cell_average(a, (i + l) as f64) - cell_average(a, l as f64))).powi(2)).sum()
        };
        (near + far) * self.dt
    }
}

/// Builds paths for one parameter set; the kernel tables are shared.
#[derive(Clone)]
pub struct FbmSampler<T: Scalar> {
    params: FbmParams<T>,
    kernel: Arc<Kernel>,
}

impl<T: Scalar> FbmSampler<T> {
    pub fn new(params: FbmParams<T>) -> Result<Self> {
        params.validate()?;
        let kernel = Kernel::new(params.hurst.as_f64(), params.dt().as_f64(), params.steps, params.past_cells()?);
        Ok(FbmSampler { params, kernel: Arc::new(kernel) })
    }

    pub fn params(&self) -> &FbmParams<T> {
        &self.params
    }

    /// Cells per coordinate: past cells followed by the `steps` cells of
    /// `[0, T]`.
    pub fn cells(&self) -> usize {
        self.kernel.past_cells + self.kernel.steps
    }

    /// Path driven by coordinate streams `rng::stream(seed, coord)`.
    pub fn sample(&self, seed: u64) -> FbmPath<T> {
        let sd = self.kernel.dt.sqrt();
        let increments = (0..self.params.dim)
            .map(|c| {
                let mut r = rng::stream(seed, c as u64);
                (0..self.cells()).map(|_| T::lit(sd * r.sample::<f64, _>(StandardNormal))).collect()
            })
            .collect();
        self.assemble(increments, seed)
    }

    /// Path with `seed` derived from `(master, index)`: the `index`-th member
    /// of an ensemble.
    pub fn sample_member(&self, master: u64, index: u64) -> FbmPath<T> {
        self.sample(rng::derive(master, &[index]))
    }

    /// Path from explicit Wiener increments, one vector of [`Self::cells`]
    /// entries per coordinate.
    pub fn path_from_increments(&self, increments: Vec<Vec<T>>, seed: u64) -> Result<FbmPath<T>> {
        if increments.len() != self.params.dim || increments.iter().any(|v| v.len() != self.cells()) {
            return Err(Error::Shape(format!("expected {} coordinates of {} increments", self.params.dim, self.cells())));
        }
        Ok(self.assemble(increments, seed))
    }

    /// Same increments up to time `u`, fresh ones (from `seed`) afterwards.
    pub fn resample_after(&self, path: &FbmPath<T>, u: T, seed: u64) -> Result<FbmPath<T>> {
        let iu = path.grid_index(u)?;
        let keep = self.kernel.past_cells + iu;
        let sd = self.kernel.dt.sqrt();
        let increments = path
            .increments
            .iter()
            .enumerate()
            .map(|(c, old)| {
                let mut r = rng::stream(seed, c as u64);
                let mut v = old[..keep].to_vec();
                v.extend((keep..old.len()).map(|_| T::lit(sd * r.sample::<f64, _>(StandardNormal))));
                v
            })
            .collect();
        Ok(self.assemble(increments, seed))
    }

    fn assemble(&self, increments: Vec<Vec<T>>, seed: u64) -> FbmPath<T> {
        let k = self.kernel.past_cells;
        let mut values = Vec::with_capacity(increments.len());
        let mut past_parts = Vec::with_capacity(increments.len());
        for inc in &increments {
            let inc64: Vec<f64> = inc.iter().map(|x| x.as_f64()).collect();
            let past = self.kernel.past_part(&inc64[..k]);
            let near = convolve(&self.kernel.near, &inc64[k..]);
            let mut b: Vec<T> = (0..=self.kernel.steps).map(|i| T::lit(past[i] + near[i])).collect();
            b[0] = T::zero();
            values.push(b);
            past_parts.push(past.into_iter().map(T::lit).collect());
        }
        FbmPath { params: self.params.clone(), seed, kernel: self.kernel.clone(), increments, values, past_parts }
    }

    /// Exact variance of the discretised `B_t` at grid time `t`.
    pub fn grid_variance(&self, t: T) -> Result<f64> {
        let i = grid_index(t, self.params.dt(), self.params.steps)?;
        Ok(self.kernel.grid_variance(i, self.kernel.past_cells))
    }

    /// Relative change of `Var(B_T)` when the past truncation is doubled: the
    /// size of the truncation bias still present.
    pub fn truncation_bias(&self) -> f64 {
        let n = self.kernel.steps;
        let v1 = self.kernel.grid_variance(n, self.kernel.past_cells);
        let v2 = self.kernel.grid_variance(n, 2 * self.kernel.past_cells);
        (v2 - v1) / v1
    }
}

fn grid_index<T: Scalar>(t: T, dt: T, steps: usize) -> Result<usize> {
    let pos = (t / dt).as_f64();
    let i = pos.round();
    if (pos - i).abs() > 1e-9 * pos.abs().max(1.0) || i < 0.0 || i > steps as f64 {
        return Err(Error::OffGrid { time: t.as_f64(), step: dt.as_f64() });
    }
    Ok(i as usize)
}

/// One sampled path with its Wiener increments.
#[derive(Clone)]
pub struct FbmPath<T: Scalar> {
    params: FbmParams<T>,
    seed: u64,
    kernel: Arc<Kernel>,
    /// Per coordinate: increments of the past cells (oldest first), then of
    /// the cells of `[0, T]`.
    increments: Vec<Vec<T>>,
    values: Vec<Vec<T>>,
    past_parts: Vec<Vec<T>>,
}

impl<T: Scalar> FbmPath<T> {
    pub fn params(&self) -> &FbmParams<T> {
        &self.params
    }

    pub fn hurst(&self) -> T {
        self.params.hurst
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn horizon(&self) -> T {
        self.params.horizon
    }

    pub fn steps(&self) -> usize {
        self.params.steps
    }

    pub fn dt(&self) -> T {
        self.params.dt()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time(&self, i: usize) -> T {
        self.dt() * T::lit(i as f64)
    }

    /// Index of grid time `t`, or [`Error::OffGrid`].
    pub fn grid_index(&self, t: T) -> Result<usize> {
        grid_index(t, self.dt(), self.params.steps)
    }

    fn check_coord(&self, coord: usize) -> Result<()> {
        if coord >= self.params.dim {
            return invalid(format!("coordinate {coord} out of range for dimension {}", self.params.dim));
        }
        Ok(())
    }

    /// `B` at the grid times `0, dt, ..., T`.
    pub fn values(&self, coord: usize) -> &[T] {
        &self.values[coord]
    }

    /// Increments of the past cells followed by those of `[0, T]`.
    pub fn increments(&self, coord: usize) -> &[T] {
        &self.increments[coord]
    }

    pub fn value_at(&self, coord: usize, t: T) -> Result<T> {
        self.check_coord(coord)?;
        Ok(self.values[coord][self.grid_index(t)?])
    }

    /// `E_u B_v = X_v + sum_{cells before u} K(v - r) dW`.
    pub fn conditional_mean(&self, coord: usize, u: T, v: T) -> Result<T> {
        self.check_coord(coord)?;
        let (iu, iv) = (self.grid_index(u)?, self.grid_index(v)?);
        if iu > iv {
            return domain(format!("conditional mean needs u <= v, got ({u}, {v})"));
        }
        if iu == iv || self.kernel.hurst == 0.5 {
            return Ok(self.values[coord][iu]);
        }
        let k = self.kernel.past_cells;
        let inc = &self.increments[coord][k..];
        let mut acc = self.past_parts[coord][iv].as_f64();
        for (q, dw) in inc[..iu].iter().enumerate() {
            acc += self.kernel.near[iv - q] * dw.as_f64();
        }
        Ok(T::lit(acc))
    }

    /// `E_u B_r` for every grid time `r` in `[u, v]`, starting with `B_u`.
    pub fn conditional_means(&self, coord: usize, u: T, v: T) -> Result<Vec<T>> {
        self.check_coord(coord)?;
        let (iu, iv) = (self.grid_index(u)?, self.grid_index(v)?);
        if iu > iv {
            return domain(format!("conditional means need u <= v, got ({u}, {v})"));
        }
        let b = &self.values[coord];
        if self.kernel.hurst == 0.5 {
            return Ok(vec![b[iu]; iv - iu + 1]);
        }
        // subtract the part of B_r driven by increments in (u, r]
        let k = self.kernel.past_cells;
        let seg: Vec<f64> = self.increments[coord][k + iu..k + iv].iter().map(|x| x.as_f64()).collect();
        let future = convolve(&self.kernel.near[..=iv - iu], &seg);
        let mut out: Vec<T> = (iu..=iv).map(|r| T::lit(b[r].as_f64() - future.get(r - iu).copied().unwrap_or(0.0))).collect();
        out[0] = b[iu];
        Ok(out)
    }

    /// `Var(B_v | F_u) = rho(u, v)`.
    pub fn residual_variance(&self, u: T, v: T) -> Result<T> {
        rho(self.params.hurst, u, v)
    }

    /// CSV with columns `time,b0,b1,...`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.params.dim).map(|c| format!("b{c}")).collect();
        writeln!(out, "time,{}", header.join(","))?;
        for i in 0..=self.params.steps {
            let row: Vec<String> = self.values.iter().map(|b| format!("{:e}", b[i].as_f64())).collect();
            writeln!(out, "{:e},{}", self.time(i).as_f64(), row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_examples() {
        assert_eq!(rho(0.5, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(rho(0.25, 0.0, 1.0).unwrap(), 2.0);
        assert_eq!(rho(0.7, 0.3, 0.3).unwrap(), 0.0);
        assert!(rho(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn variance_constant() {
        assert!((mvn_variance_constant(0.5) - 1.0).abs() < 1e-12);
        // numerical integration of the kernel for H = 0.25
        let h = 0.25f64;
        let a = h - 0.5;
        let near = 1.0 / (2.0 * h);
        // int_0^inf ((1+x)^a - x^a)^2 dx by substitution x = y^4 to tame x^a near 0
        let n = 400_000;
        let ymax: f64 = 60.0;
        let dy = ymax / n as f64;
        let mut far = 0.0;
        for k in 0..n {
            let y = (k as f64 + 0.5) * dy;
            let x = y.powi(4);
            far += ((1.0 + x).powf(a) - x.powf(a)).powi(2) * 4.0 * y.powi(3) * dy;
        }
        let total = near + far;
        assert!((mvn_variance_constant(h) - total).abs() < 2e-3 * total, "{total}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(FbmSampler::new(FbmParams::new(1.2, 1, 1.0, 16)).is_err());
        assert!(FbmSampler::new(FbmParams::new(0.3, 0, 1.0, 16)).is_err());
        assert!(FbmSampler::new(FbmParams::new(0.3, 1, 1.0, 16).with_past(0.05)).is_err());
        assert!(FbmSampler::new(FbmParams::new(0.3, 1, 1.0, 16).with_past(0.0625)).is_err());
    }

    #[test]
    fn brownian_case_is_cumulative_sum() {
        let s = FbmSampler::new(FbmParams::new(0.5, 2, 1.0, 64)).unwrap();
        let p = s.sample(3);
        for c in 0..2 {
            let inc = &p.increments(c)[s.kernel.past_cells..];
            let mut acc = 0.0f64;
            for i in 0..64 {
                acc += inc[i];
                assert!((p.values(c)[i + 1] - acc).abs() < 1e-12);
            }
            assert_eq!(p.conditional_mean(c, 0.25, 0.75).unwrap(), p.value_at(c, 0.25).unwrap());
        }
    }

    #[test]
    fn deterministic_and_starts_at_zero() {
        let s = FbmSampler::new(FbmParams::new(0.3, 1, 2.0, 128)).unwrap();
        let a = s.sample(11);
        let b = s.sample(11);
        assert_eq!(a.values(0), b.values(0));
        assert_eq!(a.values(0)[0], 0.0);
        assert_ne!(a.values(0), s.sample(12).values(0));
    }

    #[test]
    fn conditional_mean_at_equal_times_is_the_value() {
        let s = FbmSampler::new(FbmParams::new(0.25, 1, 1.0, 256)).unwrap();
        let p = s.sample(5);
        for t in [0.0, 0.125, 0.5, 1.0] {
            assert_eq!(p.conditional_mean(0, t, t).unwrap(), p.value_at(0, t).unwrap());
        }
        assert!(matches!(p.value_at(0, 0.1), Err(Error::OffGrid { .. })));
        assert!(p.conditional_mean(0, 0.5, 0.25).is_err());
    }

    #[test]
    fn batched_conditional_means_match_single() {
        for h in [0.25f64, 0.75] {
            let s = FbmSampler::<f64>::new(FbmParams::new(h, 1, 1.0, 512)).unwrap();
            let p = s.sample(9);
            let (u, v) = (0.25, 0.75);
            let batch = p.conditional_means(0, u, v).unwrap();
            let iu = p.grid_index(u).unwrap();
            for (j, m) in batch.iter().enumerate() {
                let single = p.conditional_mean(0, u, p.time(iu + j)).unwrap();
                assert!((m - single).abs() < 1e-11, "{h} {j}: {m} vs {single}");
            }
        }
    }

    #[test]
    fn residual_weights_reproduce_rho() {
        let s = FbmSampler::new(FbmParams::new(0.25, 1, 1.0, 64)).unwrap();
        let dt = 1.0 / 64.0;
        for m in [1usize, 5, 64] {
            let v: f64 = s.kernel.near[1..=m].iter().map(|w| w * w * dt).sum();
            let expect = rho(0.25, 0.0, m as f64 * dt).unwrap();
            assert!((v - expect).abs() < 1e-13 * expect);
        }
    }

    #[test]
    fn grid_variance_near_mvn_value() {
        for h in [0.25, 0.5, 0.75] {
            let s = FbmSampler::new(FbmParams::new(h, 1, 1.0, 256).with_past(64.0)).unwrap();
            let v = s.grid_variance(1.0).unwrap();
            let c = mvn_variance_constant(h);
            assert!((v - c).abs() < 0.03 * c, "H={h}: {v} vs {c}");
            assert!(s.truncation_bias().abs() < 0.02);
        }
    }

    #[test]
    fn resample_keeps_the_past() {
        let s = FbmSampler::new(FbmParams::new(0.3, 1, 1.0, 64)).unwrap();
        let p = s.sample(1);
        let q = s.resample_after(&p, 0.5, 99).unwrap();
        for t in [0.0, 0.25, 0.5] {
            assert_eq!(p.value_at(0, t).unwrap(), q.value_at(0, t).unwrap());
        }
        assert_eq!(p.conditional_mean(0, 0.5, 0.75).unwrap(), q.conditional_mean(0, 0.5, 0.75).unwrap());
        assert_ne!(p.value_at(0, 0.75).unwrap(), q.value_at(0, 0.75).unwrap());
    }

    #[test]
    fn single_precision_paths() {
        let s = FbmSampler::<f32>::new(FbmParams::new(0.4f32, 1, 1.0, 64)).unwrap();
        let p = s.sample(2);
        assert_eq!(p.values(0).len(), 65);
        assert!(p.values(0).iter().all(|x| x.is_finite()));
    }

    #[test]
    fn csv_export() {
        let s = FbmSampler::new(FbmParams::new(0.5, 2, 1.0, 4)).unwrap();
        let mut buf = Vec::new();
        s.sample(0).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("time,b0,b1\n"));
    }
}
