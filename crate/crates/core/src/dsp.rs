//! Small numeric helpers shared by the analysis modules.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Full complex spectrum of a real signal (unnormalised).
pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(buf.len(), false).process(&mut buf);
    buf
}

/// Inverse of [`fft_real`], returning the real part scaled by `1/N`.
pub fn ifft_real(spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    plan(buf.len(), true).process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Phase factor delaying bin `k` of an `n`-point spectrum by `delay` samples.
///
/// The Nyquist bin of an even-length transform gets the real part only so the
/// shifted signal stays real.
#[inline]
pub fn delay_phase(k: usize, n: usize, delay: f64) -> Complex64 {
    let signed_k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    let phi = -2.0 * PI * signed_k * delay / n as f64;
    if n.is_multiple_of(2) && k == n / 2 {
        Complex64::new(phi.cos(), 0.0)
    } else {
        Complex64::from_polar(1.0, phi)
    }
}

/// Circular band-limited shift: `y[n] = x[n - delay]`.
pub fn fractional_shift(x: &[f64], delay: f64) -> Vec<f64> {
    let n = x.len();
    let mut spec = fft_real(x);
    for (k, c) in spec.iter_mut().enumerate() {
        *c *= delay_phase(k, n, delay);
    }
    ifft_real(&spec)
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn demean(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    x.iter().map(|v| v - m).collect()
}

/// Pearson correlation; 0 when either input has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    }
}
