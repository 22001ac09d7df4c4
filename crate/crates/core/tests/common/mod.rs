#![allow(dead_code)]

use std::f64::consts::PI;

use myograph::pipeline::InputRecord;
use myograph::{MontageKind, MontageSignal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FS: f64 = 2048.0;
pub const IED: f64 = 0.008;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

/// Sum of sinusoids evaluated at `t = i / fs - delay_s`, so any delay is exact.
pub struct MultiTone {
    pub tones: Vec<(f64, f64, f64)>, // (freq, amplitude, phase)
}

impl MultiTone {
    pub fn random(n_tones: usize, lo: f64, hi: f64, seed: u64) -> Self {
        let mut r = rng(seed);
        let tones = (0..n_tones)
            .map(|_| (r.random_range(lo..hi), r.random_range(0.5..1.0), r.random_range(0.0..2.0 * PI)))
            .collect();
        Self { tones }
    }

    pub fn sample(&self, n: usize, fs: f64, delay_s: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / fs - delay_s;
                self.tones.iter().map(|&(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum()
            })
            .collect()
    }
}

pub fn montage(kind: MontageKind, channels: Vec<Vec<f64>>) -> MontageSignal {
    let m = channels.len();
    MontageSignal {
        kind,
        column: 0,
        positions_m: (0..m).map(|i| (i as f64 + 1.0) * IED).collect(),
        usable: vec![true; m],
        channels,
        sampling_rate_hz: FS,
        ied_m: IED,
    }
}

pub fn dd(channels: Vec<Vec<f64>>) -> MontageSignal {
    montage(MontageKind::DoubleDifferential, channels)
}

pub fn input() -> InputRecord {
    InputRecord {
        signal: "memory".into(),
        signal_sha256: String::new(),
        meta: "memory".into(),
        meta_sha256: String::new(),
    }
}

/// Trapezoidal integral of `g(f) * p(f)` over `[lo, hi]` on a sampled grid,
/// with linear interpolation at the limits.
pub fn band_integral(freqs: &[f64], power: &[f64], lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let at = |f: f64| {
        for k in 0..freqs.len() - 1 {
            if freqs[k] <= f && f <= freqs[k + 1] {
                let u = (f - freqs[k]) / (freqs[k + 1] - freqs[k]);
                return power[k] * (1.0 - u) + power[k + 1] * u;
            }
        }
        panic!("{f} outside grid");
    };
    let mut pts = vec![(lo, at(lo))];
    pts.extend(freqs.iter().zip(power).filter(|(f, _)| **f > lo && **f < hi).map(|(f, p)| (*f, *p)));
    pts.push((hi, at(hi)));
    pts.windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (g(w[0].0) * w[0].1 + g(w[1].0) * w[1].1))
        .sum()
}

pub fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Integer lag in `-max..=max` maximising the raw cross-correlation
/// `sum a[i] b[i + lag]`.
pub fn xcorr_peak_lag(a: &[f64], b: &[f64], max: isize) -> isize {
    let n = a.len() as isize;
    (-max..=max)
        .map(|lag| {
            let s: f64 = (0.max(-lag)..n.min(n - lag)).map(|i| a[i as usize] * b[(i + lag) as usize]).sum();
            (lag, s)
        })
        .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
        .0
}

/// Windowed-sinc fractional delay: `y[i] = x(i - d)` for interior samples.
pub fn sinc_delay(x: &[f64], d: f64, half_width: isize) -> Vec<f64> {
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let centre = i as f64 - d;
            let base = centre.floor() as isize;
            (base - half_width + 1..=base + half_width)
                .filter(|j| (0..n).contains(j))
                .map(|j| {
                    let u = centre - j as f64;
                    let sinc = if u.abs() < 1e-12 { 1.0 } else { (PI * u).sin() / (PI * u) };
                    let w = 0.5 + 0.5 * (PI * u / half_width as f64).cos();
                    x[j as usize] * sinc * w
                })
                .sum()
        })
        .collect()
}
