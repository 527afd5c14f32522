//! Real linear convolution through complex FFTs, in `f64`.

use num_complex::Complex;
use rustfft::FftPlanner;

/// Below this many multiply-adds the direct sum is used.
const DIRECT_LIMIT: usize = 1 << 14;

/// Full linear convolution, length `a.len() + b.len() - 1`.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT {
        let mut out = vec![0.0; len];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    let n = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex<f64>> = a.iter().map(|x| Complex::new(*x, 0.0)).chain(std::iter::repeat(Complex::new(0.0, 0.0))).take(n).collect();
    let mut fb: Vec<Complex<f64>> = b.iter().map(|x| Complex::new(*x, 0.0)).chain(std::iter::repeat(Complex::new(0.0, 0.0))).take(n).collect();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y);
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..len].iter().map(|z| z.re * scale).collect()
}
