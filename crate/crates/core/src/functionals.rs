//! Additive functionals `I[f]_t(x) = int_0^t f_r(B_r + x) dr` of a fractional
//! Brownian path, their sewing germ
//! `A_{s,t}(x) = int_s^t P_{rho(s,r) I} f_r(E_s B_r + x) dr`, Riemann sums,
//! exponent budgets and the regularity and occupation checks.
//!
//! Everything is assembled in frequency space: for a profile `f_r = a(r) g`
//! the germ is the multiplier
//! `sum_r dt a(r) e^{-rho(s,r)|xi|^2/2} e^{i xi . E_s B_r}` applied to `g`.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{Control, Partition};
use crate::error::{invalid, Error, Result};
use crate::fbm::FbmPath;
use crate::scalar::Scalar;
use crate::sewing::germ::Germ;
use crate::spectral::{besov_from_blocks, exponent, fft_nd, BesovIndices, GridFunction, GridSpec, ModeSet};
use crate::stats;

/// Built-in spatial profiles, constant in time unless a time weight is added.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `e^{i pi k . x / L}`.
    PlaneWave { k: [i64; 2] },
    GaussianBump {
        sigma: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Grid Dirac mass at the origin.
    Dirac,
    /// Random blocks `j = 0..blocks` with amplitude `2^{-j alpha}`.
    BesovRandom { alpha: f64, seed: u64, blocks: i32 },
}

fn one() -> f64 {
    1.0
}

/// Configuration of a time profile: spatial kind, time integrability `theta`
/// (absent = infinity) and an optional override of the spatial Besov class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    #[serde(flatten)]
    pub kind: ProfileKind,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub class: Option<BesovIndices>,
}

impl ProfileSpec {
    pub fn new(kind: ProfileKind) -> Self {
        ProfileSpec { kind, theta: None, class: None }
    }

    /// Default spatial class of each built-in: smooth kinds are placed in
    /// `B^2_{2,2}`, the Dirac in `B^{-d/2-0.01}_{2,2}`, random blocks in
    /// `B^alpha_{2,2}`.
    pub fn default_class(&self, dim: usize) -> BesovIndices {
        match &self.kind {
            ProfileKind::Dirac => BesovIndices { alpha: -(dim as f64) / 2.0 - 0.01, p: 2.0, q: 2.0 },
            ProfileKind::BesovRandom { alpha, .. } => BesovIndices { alpha: *alpha, p: 2.0, q: 2.0 },
            _ => BesovIndices { alpha: 2.0, p: 2.0, q: 2.0 },
        }
    }

    pub fn build<T: Scalar>(&self, spec: GridSpec<T>) -> Result<TimeProfile<T>> {
        let l = spec.half_period.as_f64();
        let (g, singular, name) = match &self.kind {
            ProfileKind::Constant { value } => (GridFunction::constant(spec, T::lit(*value)), false, "constant"),
            ProfileKind::PlaneWave { k } => {
                let modes = [(*k, Complex::new(T::one(), T::zero()))];
                (GridFunction::from_modes(spec, &modes)?, false, "plane_wave")
            }
            ProfileKind::GaussianBump { sigma, center } => {
                if !(*sigma > 0.0) {
                    return invalid("gaussian bump needs sigma > 0");
                }
                (GridFunction::gaussian_bump(spec, T::lit(*sigma), [T::lit(center[0]), T::lit(center[1])]), false, "gaussian_bump")
            }
            ProfileKind::Dirac => (GridFunction::dirac(spec, [T::zero(), T::zero()]), true, "dirac"),
            ProfileKind::BesovRandom { alpha, seed, blocks } => {
                let js: Vec<i32> = (0..*blocks).collect();
                let modes = ModeSet::random_blocks(spec.dim, l, &js, *alpha, *seed);
                if modes.max_frequency() >= spec.nyquist().as_f64() {
                    return invalid(format!("{blocks} random blocks do not fit below the Nyquist frequency"));
                }
                (modes.to_grid(spec)?, false, "besov_random")
            }
        };
        let class = self.class.unwrap_or_else(|| self.default_class(spec.dim));
        class.validate()?;
        if let Some(th) = self.theta {
            if !(th > 1.0) {
                return invalid(format!("time integrability theta must exceed 1, got {th}"));
            }
        }
        let mut p = TimeProfile::new(g, class, self.theta, singular)?;
        p.name = name.to_string();
        Ok(p)
    }
}

type TimeWeight = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Time-dependent spatial profile `f_r = a(r) g`.
#[derive(Clone)]
pub struct TimeProfile<T: Scalar> {
    spatial: GridFunction<T>,
    spectrum: Arc<Vec<Complex<T>>>,
    class: BesovIndices,
    theta: Option<f64>,
    singular: bool,
    time_weight: Option<TimeWeight>,
    name: String,
}

impl<T: Scalar> TimeProfile<T> {
    /// `singular` marks distributions (the Dirac) whose first quadrature node
    /// needs the heat smoothing of its cell.
    pub fn new(spatial: GridFunction<T>, class: BesovIndices, theta: Option<f64>, singular: bool) -> Result<Self> {
        let spectrum = Arc::new(spatial.spectrum());
        Ok(TimeProfile { spatial, spectrum, class, theta, singular, time_weight: None, name: "custom".into() })
    }

    /// Multiplies the profile by the scalar time weight `a(r)`.
    pub fn with_time_weight(mut self, a: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.time_weight = Some(Arc::new(a));
        self
    }

    pub fn spatial(&self) -> &GridFunction<T> {
        &self.spatial
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.spatial.spec()
    }

    pub fn class(&self) -> BesovIndices {
        self.class
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn weight(&self, r: f64) -> f64 {
        self.time_weight.as_ref().map_or(1.0, |a| a(r))
    }

    /// Control built from the time profile of `|f_r|_{B^alpha_{p,inf}}` on
    /// `cells` uniform cells of `[0, horizon]`.
    pub fn control(&self, hurst: f64, gamma: f64, horizon: f64, cells: usize) -> Result<Control<f64>> {
        let norm = self.spatial.besov_norm(&BesovIndices { q: f64::INFINITY, ..self.class })?;
        let dt = horizon / cells as f64;
        let profile: Vec<f64> = (0..cells).map(|k| self.weight((k as f64 + 0.5) * dt).abs() * norm).collect();
        Control::besov_data(profile, self.theta, hurst, gamma, horizon)
    }
}

/// Per-axis factors `e^{-rho xi_k^2/2} e^{i xi_k mu}` for the FFT bins; the
/// Nyquist bin takes the real part of the phase so that real inputs stay real.
fn axis_factors(spec: &GridSpec<f64>, rho: f64, mu: f64, out: &mut [Complex<f64>]) {
    let n = spec.n;
    let unit = std::f64::consts::PI / spec.half_period;
    let step = Complex::new((unit * mu).cos(), (unit * mu).sin());
    let decay = (-rho * unit * unit / 2.0).exp();
    let mut phase = Complex::new(1.0, 0.0);
    for k in 0..=n / 2 {
        let heat = if rho == 0.0 { 1.0 } else { decay.powf((k * k) as f64) };
        if k == n / 2 {
            let ph = unit * (n / 2) as f64 * mu;
            out[k] = Complex::new(heat * ph.cos(), 0.0);
        } else {
            out[k] = phase * heat;
            if k > 0 {
                out[n - k] = out[k].conj();
            }
        }
        phase *= step;
        if k % 64 == 63 {
            // re-anchor the recurrence
            let ph = unit * (k + 1) as f64 * mu;
            phase = Complex::new(ph.cos(), ph.sin());
        }
    }
}

/// Accumulates the multiplier of `int_s^t P_{rho(s,r)} f_r(E_s B_r + .) dr`
/// (left-point rule on the path grid, every `stride`-th node) into `acc`.
/// With `conditional = false` the exact path and no smoothing are used, which
/// gives the direct quadrature of `int f_r(B_r + .) dr`.
fn accumulate<T: Scalar>(profile: &TimeProfile<T>, path: &FbmPath<T>, s: T, t: T, stride: usize, conditional: bool, acc: &mut [Complex<f64>]) -> Result<()> {
    let spec64 = GridSpec::<f64> { dim: profile.grid().dim, half_period: profile.grid().half_period.as_f64(), n: profile.grid().n };
    let d = spec64.dim;
    if path.dim() != d {
        return Err(Error::Shape(format!("path has {} coordinates but the grid is {d}-dimensional", path.dim())));
    }
    let (is, it) = (path.grid_index(s)?, path.grid_index(t)?);
    if is > it {
        return invalid(format!("interval [{s}, {t}] is reversed"));
    }
    if is == it {
        return Ok(());
    }
    let means: Vec<Vec<T>> = if conditional {
        (0..d).map(|c| path.conditional_means(c, s, t)).collect::<Result<_>>()?
    } else {
        (0..d).map(|c| path.values(c)[is..=it].to_vec()).collect()
    };
    let dt = path.dt().as_f64();
    let h = path.hurst().as_f64();
    let n = spec64.n;
    let mut fac = vec![vec![Complex::new(0.0, 0.0); n]; d];
    let mut m = 0;
    while is + m < it {
        let cell = dt * stride.min(it - is - m) as f64;
        let r = (is + m) as f64 * dt;
        let weight = cell * profile.weight(r);
        let rho = if !conditional {
            0.0
        } else if m == 0 && profile.singular {
            cell.powf(2.0 * h) / (2.0 * h)
        } else {
            (m as f64 * dt).powf(2.0 * h) / (2.0 * h)
        };
        for (a, f) in fac.iter_mut().enumerate() {
            axis_factors(&spec64, rho, means[a][m].as_f64(), f);
        }
        if d == 1 {
            acc.iter_mut().zip(&fac[0]).for_each(|(z, f)| *z += f * weight);
        } else {
            for i in 0..n {
                let fi = fac[0][i] * weight;
                let row = &mut acc[i * n..(i + 1) * n];
                row.iter_mut().zip(&fac[1]).for_each(|(z, f)| *z += fi * f);
            }
        }
        m += stride;
    }
    Ok(())
}

fn apply<T: Scalar>(profile: &TimeProfile<T>, multiplier: Vec<Complex<f64>>) -> GridFunction<T> {
    let spec = *profile.grid();
    let coeffs: Vec<Complex<T>> = profile
        .spectrum
        .iter()
        .zip(multiplier)
        .map(|(g, m)| g * Complex::new(T::lit(m.re), T::lit(m.im)))
        .collect();
    GridFunction::from_spectrum(spec, coeffs)
}

/// `A_{s,t}` for the profile along the path; zero when `s = t`.
pub fn germ_value<T: Scalar>(profile: &TimeProfile<T>, path: &FbmPath<T>, s: T, t: T, stride: usize) -> Result<GridFunction<T>> {
    check_stride(stride)?;
    let mut acc = vec![Complex::new(0.0, 0.0); profile.grid().len()];
    accumulate(profile, path, s, t, stride, true, &mut acc)?;
    Ok(apply(profile, acc))
}

/// `I^pi[f] = sum_{[u,v] in pi} A_{u,v}`.
pub fn functional_riemann<T: Scalar>(profile: &TimeProfile<T>, path: &FbmPath<T>, pi: &Partition<T>, stride: usize) -> Result<GridFunction<T>> {
    check_stride(stride)?;
    let mut acc = vec![Complex::new(0.0, 0.0); profile.grid().len()];
    for (u, v) in pi.intervals() {
        accumulate(profile, path, u, v, stride, true, &mut acc)?;
    }
    Ok(apply(profile, acc))
}

/// Direct left-point quadrature of `int_0^t f_r(B_r + x) dr` on the path grid.
pub fn functional_reference<T: Scalar>(profile: &TimeProfile<T>, path: &FbmPath<T>, t: T, stride: usize) -> Result<GridFunction<T>> {
    check_stride(stride)?;
    let mut acc = vec![Complex::new(0.0, 0.0); profile.grid().len()];
    accumulate(profile, path, T::zero(), t, stride, false, &mut acc)?;
    Ok(apply(profile, acc))
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        return invalid("quadrature stride must be at least 1");
    }
    Ok(())
}

/// The germ as a sewing-engine input. It is `F_s`-measurable, so its
/// conditional mean is itself.
#[derive(Clone)]
pub struct FunctionalGerm<T: Scalar> {
    pub profile: TimeProfile<T>,
    pub stride: usize,
}

impl<T: Scalar> FunctionalGerm<T> {
    pub fn new(profile: TimeProfile<T>) -> Self {
        FunctionalGerm { profile, stride: 1 }
    }
}

impl<T: Scalar> Germ<T> for FunctionalGerm<T> {
    type Ctx = FbmPath<T>;
    type Output = GridFunction<T>;
    fn eval(&self, path: &FbmPath<T>, s: T, t: T) -> Result<GridFunction<T>> {
        germ_value(&self.profile, path, s, t, self.stride)
    }
    fn cond_mean(&self, path: &FbmPath<T>, s: T, t: T) -> Result<GridFunction<T>> {
        self.eval(path, s, t)
    }
    fn name(&self) -> &str {
        "functional"
    }
}

/// Admissible range of `v` for `I[delta]_t in L^v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VRange {
    pub lo: f64,
    #[serde(with = "exponent")]
    pub hi: f64,
    pub hi_inclusive: bool,
}

/// Exponents licensed by the regularity theory for given `(H, d, theta,
/// alpha, p, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentBudget {
    pub hurst: f64,
    pub dim: usize,
    #[serde(with = "exponent")]
    pub theta: f64,
    pub alpha: f64,
    #[serde(with = "exponent")]
    pub p: f64,
    #[serde(with = "exponent")]
    pub q: f64,
    /// `min(2, theta, p, q)`.
    pub p_hat: f64,
    /// `(1/H)(1 - 1/p_hat)`: spatial regularity gained by integrating in time.
    pub gamma_max: f64,
    /// `alpha - d/p + (1/H)(1 - 1/min(2, theta, p))`: Hoelder exponent bound.
    pub beta_max: f64,
    pub gamma_admissible: bool,
    pub beta_admissible: bool,
    /// `L^v` range for Dirac-class profiles (`theta >= 2`); `None` when
    /// `H d >= 1`.
    pub dirac_v_range: Option<VRange>,
}

impl ExponentBudget {
    /// Time exponent `1 - H gamma - 1/theta` of the functional's increments.
    pub fn time_exponent(&self, gamma: f64) -> f64 {
        1.0 - self.hurst * gamma - 1.0 / self.theta
    }

    /// Mesh exponent `1 - H gamma - 1/p_hat` of the Riemann-sum error.
    pub fn rate_exponent(&self, gamma: f64) -> f64 {
        1.0 - self.hurst * gamma - 1.0 / self.p_hat
    }
}

pub fn regularity_budget(hurst: f64, dim: usize, theta: f64, alpha: f64, p: f64, q: f64) -> Result<ExponentBudget> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return invalid(format!("Hurst exponent must lie in (0,1), got {hurst}"));
    }
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    for (name, v) in [("theta", theta), ("p", p), ("q", q)] {
        if !(v > 1.0) {
            return invalid(format!("{name} must lie in (1, inf], got {v}"));
        }
    }
    let p_hat = 2f64.min(theta).min(p).min(q);
    let gamma_max = (1.0 - 1.0 / p_hat) / hurst;
    let beta_max = alpha - dim as f64 / p + (1.0 - 1.0 / 2f64.min(theta).min(p)) / hurst;
    let hd = hurst * dim as f64;
    let dirac_v_range = if hd < 0.5 {
        Some(VRange { lo: 2.0, hi: f64::INFINITY, hi_inclusive: true })
    } else if hd < 1.0 {
        let hi = if hd == 0.5 { f64::INFINITY } else { 2.0 * hd / (2.0 * hd - 1.0) };
        Some(VRange { lo: 2.0, hi, hi_inclusive: false })
    } else {
        None
    };
    Ok(ExponentBudget {
        hurst,
        dim,
        theta,
        alpha,
        p,
        q,
        p_hat,
        gamma_max,
        beta_max,
        gamma_admissible: gamma_max > 0.0,
        beta_admissible: beta_max > 0.0,
        dirac_v_range,
    })
}

/// Twice the `quantile` of `sup_t |B_t|` over an ensemble: a half-period that
/// keeps the shifted profiles from wrapping around the torus.
pub fn half_period_for<T: Scalar>(paths: &[FbmPath<T>], quantile: f64) -> f64 {
    let sups: Vec<f64> = paths
        .iter()
        .map(|p| (0..p.dim()).flat_map(|c| p.values(c).iter().map(|v| v.as_f64().abs())).fold(0.0, f64::max))
        .collect();
    2.0 * stats::quantile(&sups, quantile)
}

/// Per-gamma Besov statistics of the fine Riemann sum under grid refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub gammas: Vec<f64>,
    pub grid_sizes: Vec<usize>,
    pub alpha: f64,
    pub moment: f64,
    /// `stats[g][k]`: empirical `L^moment` norm over paths of
    /// `|I_t|_{B^{alpha+gamma_g}_{p,q}}` on grid `grid_sizes[k]`.
    pub stats: Vec<Vec<f64>>,
    /// Least-squares slope of `log2 stat` against `log2 n`, per gamma.
    pub trend: Vec<f64>,
    /// `stat(n_max) / stat(n_min)`, per gamma.
    pub growth: Vec<f64>,
}

/// Besov norms of `I^pi[f]_t` over the path-grid partition of `[0,t]` for each
/// `gamma` and each spatial grid size, aggregated over the paths.
#[allow(clippy::too_many_arguments)]
pub fn regularity_probe(
    profile: &ProfileSpec,
    paths: &[FbmPath<f64>],
    t: f64,
    gammas: &[f64],
    p: f64,
    q: f64,
    grid_sizes: &[usize],
    half_period: f64,
    moment: f64,
) -> Result<RegularityReport> {
    if paths.is_empty() || grid_sizes.len() < 2 || gammas.is_empty() {
        return invalid("regularity probe needs paths, gammas and at least two grid sizes");
    }
    let dim = paths[0].dim();
    let alpha = profile.class.unwrap_or_else(|| profile.default_class(dim)).alpha;
    let steps = paths[0].grid_index(t)?;
    let pi = Partition::uniform(0.0, t, steps.max(1))?;
    // norms[k][path][g]
    let mut norms: Vec<Vec<Vec<f64>>> = Vec::with_capacity(grid_sizes.len());
    for &n in grid_sizes {
        let spec = GridSpec::new(dim, half_period, n)?;
        let prof = profile.build(spec)?;
        let per_path = paths
            .par_iter()
            .map(|path| {
                let i = functional_riemann(&prof, path, &pi, 1)?;
                let blocks = i.block_norms(p);
                Ok(gammas.iter().map(|g| besov_from_blocks(&blocks, alpha + g, q)).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        norms.push(per_path);
    }
    let logn: Vec<f64> = grid_sizes.iter().map(|n| (*n as f64).log2()).collect();
    let mut stats_out = Vec::with_capacity(gammas.len());
    let mut trend = Vec::with_capacity(gammas.len());
    let mut growth = Vec::with_capacity(gammas.len());
    for g in 0..gammas.len() {
        let row: Vec<f64> = norms.iter().map(|per_path| stats::lm_norm(&per_path.iter().map(|v| v[g]).collect::<Vec<_>>(), moment)).collect();
        let logs: Vec<f64> = row.iter().map(|v| v.max(f64::MIN_POSITIVE).log2()).collect();
        trend.push(stats::least_squares(&logn, &logs)?.slope);
        growth.push(row[row.len() - 1] / row[0]);
        stats_out.push(row);
    }
    Ok(RegularityReport { gammas: gammas.to_vec(), grid_sizes: grid_sizes.to_vec(), alpha, moment, stats: stats_out, trend, growth })
}

/// Both sides of the occupation identity `<g, I[delta]_t> = int_0^t g(-B_r) dr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationResidual {
    pub pairing: f64,
    pub occupation: f64,
    /// `|pairing - occupation| / max(|occupation|, t |g|_inf)`; zero at `t = 0`.
    pub residual: f64,
}

/// Compares the grid pairing of `g` with the Dirac functional's Riemann sum
/// against the time integral of `g` along the reflected path, with `g`
/// evaluated by trigonometric interpolation.
pub fn occupation_check<T: Scalar>(path: &FbmPath<T>, g: &GridFunction<T>, t: T, pi: &Partition<T>) -> Result<OccupationResidual> {
    let spec = *g.spec();
    if path.dim() != spec.dim {
        return Err(Error::Shape("path and grid dimensions differ".into()));
    }
    let it = path.grid_index(t)?;
    if it == 0 {
        return Ok(OccupationResidual { pairing: 0.0, occupation: 0.0, residual: 0.0 });
    }
    let dirac = ProfileSpec::new(ProfileKind::Dirac).build(spec)?;
    let i = functional_riemann(&dirac, path, pi, 1)?;
    let pairing = g.pairing(&i)?.re.as_f64();
    let ghat = g.spectrum();
    let dt = path.dt().as_f64();
    let mut occupation = 0.0;
    for k in 0..it {
        let y: Vec<f64> = (0..spec.dim).map(|c| -path.values(c)[k].as_f64()).collect();
        occupation += dt * trig_eval(&spec, &ghat, &y).re;
    }
    let gmax = g.lp_norm(f64::INFINITY);
    let scale = occupation.abs().max(t.as_f64() * gmax);
    let residual = if scale == 0.0 { 0.0 } else { (pairing - occupation).abs() / scale };
    Ok(OccupationResidual { pairing, occupation, residual })
}

/// Trigonometric interpolant of grid data with spectrum `ghat` at `y`.
fn trig_eval<T: Scalar>(spec: &GridSpec<T>, ghat: &[Complex<T>], y: &[f64]) -> Complex<f64> {
    let spec64 = GridSpec::<f64> { dim: spec.dim, half_period: spec.half_period.as_f64(), n: spec.n };
    let n = spec.n;
    let l = spec64.half_period;
    // nodes start at -L: evaluate the multiplier at the offset y + L
    let mut fac = vec![vec![Complex::new(0.0, 0.0); n]; spec.dim];
    for (a, f) in fac.iter_mut().enumerate() {
        axis_factors(&spec64, 0.0, y[a] + l, f);
    }
    let mut s = Complex::new(0.0, 0.0);
    if spec.dim == 1 {
        for (c, f) in ghat.iter().zip(&fac[0]) {
            s += Complex::new(c.re.as_f64(), c.im.as_f64()) * f;
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                let c = ghat[i * n + j];
                s += Complex::new(c.re.as_f64(), c.im.as_f64()) * fac[0][i] * fac[1][j];
            }
        }
    }
    s / spec.len() as f64
}

/// Mean over the grid of `I^pi[f]` expected from mass conservation:
/// `mean(g) int a(r) dr` on the quadrature nodes of `[s, t]`.
pub fn expected_mean<T: Scalar>(profile: &TimeProfile<T>, path: &FbmPath<T>, s: T, t: T) -> Result<Complex<f64>> {
    let (is, it) = (path.grid_index(s)?, path.grid_index(t)?);
    let dt = path.dt().as_f64();
    let mass: f64 = (is..it).map(|k| dt * profile.weight(k as f64 * dt)).sum();
    let m = profile.spatial.mean();
    Ok(Complex::new(m.re.as_f64(), m.im.as_f64()) * mass)
}

/// Inverse FFT of an `f64` spectrum onto the profile's grid (exposed for
/// diagnostics that assemble multipliers themselves).
pub fn multiplier_to_grid<T: Scalar>(spec: GridSpec<T>, mut coeffs: Vec<Complex<T>>) -> GridFunction<T> {
    fft_nd(&spec, &mut coeffs, true);
    GridFunction::new(spec, coeffs).unwrap_or_else(|_| GridFunction::zeros(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{FbmParams, FbmSampler};

    fn path(h: f64, steps: usize, seed: u64) -> FbmPath<f64> {
        FbmSampler::new(FbmParams::new(h, 1, 1.0, steps)).unwrap().sample(seed)
    }

    fn grid() -> GridSpec<f64> {
        GridSpec::new(1, 6.0, 128).unwrap()
    }

    #[test]
    fn constant_profile_gives_interval_length() {
        let p = path(0.3, 64, 1);
        let prof = ProfileSpec::new(ProfileKind::Constant { value: 1.0 }).build(grid()).unwrap();
        let a = germ_value(&prof, &p, 0.25, 0.75, 1).unwrap();
        assert!(a.values().iter().all(|z| (z.re - 0.5).abs() < 1e-12 && z.im.abs() < 1e-12));
        let z = germ_value(&prof, &p, 0.5, 0.5, 1).unwrap();
        assert_eq!(z.lp_norm(f64::INFINITY), 0.0);
        let pi = Partition::new(vec![0.0, 0.125, 0.5, 1.0]).unwrap();
        let r = functional_riemann(&prof, &p, &pi, 1).unwrap();
        assert!(r.values().iter().all(|z| (z.re - 1.0).abs() < 1e-12));
        let reference = functional_reference(&prof, &p, 0.0, 1).unwrap();
        assert_eq!(reference.lp_norm(f64::INFINITY), 0.0);
    }

    #[test]
    fn plane_wave_germ_matches_closed_form() {
        let h = 0.35;
        let p = path(h, 128, 4);
        let spec = grid();
        let k = 5i64;
        let prof = ProfileSpec::new(ProfileKind::PlaneWave { k: [k, 0] }).build(spec).unwrap();
        let (s, t) = (0.25, 0.5);
        let a = germ_value(&prof, &p, s, t, 1).unwrap();
        let lam = std::f64::consts::PI * k as f64 / spec.half_period;
        let means = p.conditional_means(0, s, t).unwrap();
        let dt = p.dt();
        for idx in (0..spec.n).step_by(5) {
            let x = spec.node(idx)[0];
            let mut expect = Complex::new(0.0, 0.0);
            for (m, mu) in means.iter().take(means.len() - 1).enumerate() {
                let rho = (m as f64 * dt).powf(2.0 * h) / (2.0 * h);
                let ph = lam * (mu + x);
                expect += Complex::new(ph.cos(), ph.sin()) * (dt * (-rho * lam * lam / 2.0).exp());
            }
            assert!((a.values()[idx] - expect).norm() < 1e-12, "{idx}");
        }
    }

    #[test]
    fn germ_equals_shifted_heat_sum() {
        let h = 0.6;
        let p = path(h, 64, 2);
        let spec = grid();
        let prof = ProfileSpec::new(ProfileKind::GaussianBump { sigma: 0.4, center: [0.3, 0.0] }).build(spec).unwrap();
        let (s, t) = (0.5, 0.75);
        let a = germ_value(&prof, &p, s, t, 1).unwrap();
        let means = p.conditional_means(0, s, t).unwrap();
        let dt = p.dt();
        let mut expect = GridFunction::zeros(spec);
        for (m, mu) in means.iter().take(means.len() - 1).enumerate() {
            let rho = (m as f64 * dt).powf(2.0 * h) / (2.0 * h);
            let term = prof.spatial().heat_convolve(rho).unwrap().shift([*mu, 0.0]);
            expect = expect.combine(1.0, &term, dt).unwrap();
        }
        let diff = a.combine(1.0, &expect, -1.0).unwrap().lp_norm(f64::INFINITY);
        assert!(diff < 1e-10 * expect.lp_norm(f64::INFINITY), "{diff}");
    }

    #[test]
    fn finest_partition_reproduces_reference_for_smooth_profiles() {
        let p = path(0.25, 64, 7);
        let prof = ProfileSpec::new(ProfileKind::GaussianBump { sigma: 0.5, center: [0.0; 2] }).build(grid()).unwrap();
        let pi = Partition::uniform(0.0, 1.0, 64).unwrap();
        let a = functional_riemann(&prof, &p, &pi, 1).unwrap();
        let r = functional_reference(&prof, &p, 1.0, 1).unwrap();
        let diff = a.combine(1.0, &r, -1.0).unwrap().lp_norm(f64::INFINITY);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn linearity_and_mass() {
        let p = path(0.4, 128, 3);
        let spec = grid();
        let f = ProfileSpec::new(ProfileKind::GaussianBump { sigma: 0.3, center: [0.0; 2] }).build(spec).unwrap();
        let g = ProfileSpec::new(ProfileKind::PlaneWave { k: [3, 0] }).build(spec).unwrap();
        let combo = TimeProfile::new(f.spatial().combine(2.0, g.spatial(), -0.5).unwrap(), f.class(), None, false).unwrap();
        let pi = Partition::uniform(0.0, 1.0, 8).unwrap();
        let lhs = functional_riemann(&combo, &p, &pi, 1).unwrap();
        let rhs = functional_riemann(&f, &p, &pi, 1).unwrap().combine(2.0, &functional_riemann(&g, &p, &pi, 1).unwrap(), -0.5).unwrap();
        let diff = lhs.combine(1.0, &rhs, -1.0).unwrap().lp_norm(f64::INFINITY);
        assert!(diff <= 1e-12 * rhs.lp_norm(f64::INFINITY));
        let mean = lhs.mean();
        let expect = expected_mean(&combo, &p, 0.0, 1.0).unwrap();
        assert!((Complex::new(mean.re, mean.im) - expect).norm() < 1e-10);
    }

    #[test]
    fn germ_is_adapted() {
        let sampler = FbmSampler::new(FbmParams::new(0.3, 1, 1.0, 64)).unwrap();
        let p = sampler.sample(5);
        let q = sampler.resample_after(&p, 0.5, 77).unwrap();
        let prof = ProfileSpec::new(ProfileKind::GaussianBump { sigma: 0.3, center: [0.0; 2] }).build(grid()).unwrap();
        let a = germ_value(&prof, &p, 0.5, 1.0, 1).unwrap();
        let b = germ_value(&prof, &q, 0.5, 1.0, 1).unwrap();
        let diff = a.combine(1.0, &b, -1.0).unwrap().lp_norm(f64::INFINITY);
        assert!(diff < 1e-12, "{diff}");
        let moved = germ_value(&prof, &q, 0.75, 1.0, 1).unwrap();
        assert!(moved.combine(1.0, &germ_value(&prof, &p, 0.75, 1.0, 1).unwrap(), -1.0).unwrap().lp_norm(f64::INFINITY) > 1e-6);
    }

    #[test]
    fn time_weight_scales() {
        let p = path(0.5, 32, 1);
        let prof = ProfileSpec::new(ProfileKind::Constant { value: 1.0 }).build(grid()).unwrap().with_time_weight(|r| 2.0 * r);
        let a = germ_value(&prof, &p, 0.0, 1.0, 1).unwrap();
        // left-point rule for int_0^1 2r dr on 32 cells
        let expect = 1.0 - 1.0 / 32.0;
        assert!((a.values()[0].re - expect).abs() < 1e-12);
    }

    #[test]
    fn budget_examples() {
        let b = regularity_budget(0.25, 1, 2.0, 0.0, 2.0, 2.0).unwrap();
        assert_eq!(b.gamma_max, 2.0);
        assert_eq!(regularity_budget(0.5, 1, 2.0, 0.0, 2.0, 2.0).unwrap().gamma_max, 1.0);
        let small = regularity_budget(0.4, 1, 2.0, -0.5, 2.0, 2.0).unwrap();
        assert_eq!(small.dirac_v_range, Some(VRange { lo: 2.0, hi: f64::INFINITY, hi_inclusive: true }));
        let half = regularity_budget(0.5, 1, 2.0, -0.5, 2.0, 2.0).unwrap();
        assert_eq!(half.dirac_v_range.unwrap().hi, f64::INFINITY);
        assert!(!half.dirac_v_range.unwrap().hi_inclusive);
        let large = regularity_budget(0.75, 1, 2.0, -0.5, 2.0, 2.0).unwrap();
        assert!((large.dirac_v_range.unwrap().hi - 3.0).abs() < 1e-12);
        assert!(regularity_budget(0.75, 2, 2.0, -1.0, 2.0, 2.0).unwrap().dirac_v_range.is_none());
        assert!((b.time_exponent(1.0) - 0.25).abs() < 1e-15);
        assert!(regularity_budget(0.5, 1, 1.0, 0.0, 2.0, 2.0).is_err());
        let inf = regularity_budget(0.5, 1, f64::INFINITY, 0.0, f64::INFINITY, f64::INFINITY).unwrap();
        assert_eq!(inf.p_hat, 2.0);
        // beta_max = alpha - d/p + (1/H)(1 - 1/min(2,theta,p))
        let hb = regularity_budget(0.25, 1, 4.0, 1.0, 4.0, 4.0).unwrap();
        assert!((hb.beta_max - (1.0 - 0.25 + 4.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn occupation_constant_and_zero_time() {
        let p = path(0.5, 256, 9);
        let spec = GridSpec::new(1, 8.0, 256).unwrap();
        let pi = Partition::uniform(0.0, 1.0, 16).unwrap();
        let one = GridFunction::constant(spec, 1.0);
        let r = occupation_check(&p, &one, 1.0, &pi).unwrap();
        assert!((r.pairing - 1.0).abs() < 1e-10 && (r.occupation - 1.0).abs() < 1e-10);
        assert!(r.residual < 1e-10);
        let z = occupation_check(&p, &one, 0.0, &Partition::single(0.0)).unwrap();
        assert_eq!(z.residual, 0.0);
    }

    #[test]
    fn trig_interpolation_is_exact_for_modes() {
        let spec = GridSpec::new(1, 3.0, 64).unwrap();
        let g = GridFunction::plane_wave_mode(spec, [4, 0]);
        let ghat = g.spectrum();
        let lam = std::f64::consts::PI * 4.0 / 3.0;
        for y in [0.123, -2.5, 1.7] {
            let v = trig_eval(&spec, &ghat, &[y]);
            assert!((v - Complex::new((lam * y).cos(), (lam * y).sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn profile_spec_json() {
        let spec: ProfileSpec = serde_json::from_str(r#"{"kind":"gaussian_bump","sigma":0.5,"theta":4.0}"#).unwrap();
        assert_eq!(spec.theta, Some(4.0));
        assert!(matches!(spec.kind, ProfileKind::GaussianBump { .. }));
        let d: ProfileSpec = serde_json::from_str(r#"{"kind":"dirac"}"#).unwrap();
        assert_eq!(d.default_class(1).alpha, -0.51);
        assert!(ProfileSpec { theta: Some(1.0), ..d.clone() }.build(grid()).is_err());
    }

    #[test]
    fn control_of_constant_profile_is_linear() {
        let prof = ProfileSpec::new(ProfileKind::Constant { value: 1.0 }).build(grid()).unwrap();
        let c = prof.control(0.5, 0.5, 1.0, 16).unwrap();
        let w1 = c.eval(0.0, 0.5).unwrap();
        let w2 = c.eval(0.0, 1.0).unwrap();
        assert!((w2 / w1 - 2.0).abs() < 1e-12);
        assert!((c.w_midpoint(0.0, 1.0).unwrap() - 0.5).abs() < 1e-11);
    }
}
