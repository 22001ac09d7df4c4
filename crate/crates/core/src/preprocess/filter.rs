//! Butterworth band-pass as cascaded biquads, applied forward and backward.

use std::f64::consts::PI;

/// Second-order section in direct form II transposed, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Steady-state delay line for a constant input `x0`.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y = self.dc_gain() * x0;
        let z2 = self.b[2] * x0 - self.a[1] * y;
        let z1 = y - self.b[0] * x0;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Q factors of the conjugate pole pairs of an order-`order` Butterworth.
fn pair_qs(order: usize) -> Vec<f64> {
    (0..order / 2)
        .map(|k| {
            // pole angle from the negative real axis
            let theta = if order.is_multiple_of(2) {
                PI * (2 * k + 1) as f64 / (2 * order) as f64
            } else {
                PI * (k + 1) as f64 / order as f64
            };
            1.0 / (2.0 * theta.cos())
        })
        .collect()
}

fn lowpass(order: usize, cutoff: f64, rate: f64) -> Vec<Biquad> {
    let k = (PI * cutoff / rate).tan();
    let mut out: Vec<Biquad> = pair_qs(order)
        .into_iter()
        .map(|q| {
            let norm = 1.0 / (1.0 + k / q + k * k);
            let b0 = k * k * norm;
            Biquad {
                b: [b0, 2.0 * b0, b0],
                a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
            }
        })
        .collect();
    if order % 2 == 1 {
        let b0 = k / (k + 1.0);
        out.push(Biquad {
            b: [b0, b0, 0.0],
            a: [(k - 1.0) / (k + 1.0), 0.0],
        });
    }
    out
}

fn highpass(order: usize, cutoff: f64, rate: f64) -> Vec<Biquad> {
    let k = (PI * cutoff / rate).tan();
    let mut out: Vec<Biquad> = pair_qs(order)
        .into_iter()
        .map(|q| {
            let norm = 1.0 / (1.0 + k / q + k * k);
            Biquad {
                b: [norm, -2.0 * norm, norm],
                a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
            }
        })
        .collect();
    if order % 2 == 1 {
        let b0 = 1.0 / (k + 1.0);
        out.push(Biquad {
            b: [b0, -b0, 0.0],
            a: [(k - 1.0) / (k + 1.0), 0.0],
        });
    }
    out
}

/// High-pass at `low` cascaded with low-pass at `high`, each of `order`.
pub fn design_bandpass(order: usize, low: f64, high: f64, rate: f64) -> Vec<Biquad> {
    let mut sections = highpass(order, low, rate);
    sections.extend(lowpass(order, high, rate));
    sections
}

/// Magnitude response of a cascade at `freq`.
pub fn magnitude(sections: &[Biquad], freq: f64, rate: f64) -> f64 {
    use rustfft::num_complex::Complex64;
    let w = 2.0 * PI * freq / rate;
    let z1 = Complex64::from_polar(1.0, -w);
    let z2 = z1 * z1;
    sections
        .iter()
        .map(|s| {
            let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
            let den = 1.0 + z1 * s.a[0] + z2 * s.a[1];
            (num / den).norm()
        })
        .product()
}

fn run_cascade(sections: &[Biquad], x: &mut [f64]) {
    let mut x0 = x[0];
    for s in sections {
        let z = s.steady_state(x0);
        x0 *= s.dc_gain();
        s.run(x, z);
    }
}

/// Zero-phase filtering with odd-symmetric edge extension of `pad` samples.
pub fn filtfilt(sections: &[Biquad], x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    run_cascade(sections, &mut ext);
    ext.reverse();
    run_cascade(sections, &mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_corner_is_minus_3db() {
        let rate = 2048.0;
        let lp = lowpass(4, 400.0, rate);
        let hp = highpass(4, 20.0, rate);
        assert!((magnitude(&lp, 400.0, rate) - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((magnitude(&hp, 20.0, rate) - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((magnitude(&lp, 0.0, rate) - 1.0).abs() < 1e-12);
        assert!(magnitude(&hp, 0.0, rate) < 1e-12);
        let odd = lowpass(3, 100.0, rate);
        assert!((magnitude(&odd, 100.0, rate) - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn filtfilt_of_constant_through_lowpass_is_constant() {
        let lp = lowpass(4, 50.0, 1000.0);
        let y = filtfilt(&lp, &[2.5; 500], 30);
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-9));
    }
}
