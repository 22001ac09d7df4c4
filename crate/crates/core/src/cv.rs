//! Multi-channel maximum-likelihood delay and conduction-velocity estimation.
//!
//! For double-differential channels `x_1 .. x_K` that are delayed copies of
//! one another plus white noise, the maximum-likelihood delay minimises the
//! summed squared misalignment of adjacent channels after compensating each
//! pair by the common delay `theta`:
//!
//! ```text
//! e(theta) = sum_pairs sum_k |X_b(k) - X_a(k) exp(-j w_k theta)|^2
//! ```
//!
//! The spectra are taken once per window, so `e` is a smooth function of a
//! continuous `theta` and sub-sample delays come for free. The search scans
//! the physiological bracket on a quarter-sample grid and then refines the
//! best cell by golden-section search.

use serde::{Deserialize, Serialize};

use crate::dsp::{demean, fft_real, fractional_shift, pearson};
use crate::error::{Error, Result};
use crate::preprocess::{MontageKind, MontageSignal};

/// Shortest window the estimator accepts, in samples.
pub const MIN_WINDOW_SAMPLES: usize = 256;

const MAX_GOLDEN_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub ied_m: f64,
    pub cv_min: f64,
    pub cv_max: f64,
    pub corr_threshold: f64,
    pub search_tolerance_s: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            ied_m: 0.008,
            cv_min: 2.0,
            cv_max: 8.0,
            corr_threshold: 0.75,
            search_tolerance_s: 1e-6,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ied_m > 0.0 && self.ied_m.is_finite()) {
            return Err(Error::InvalidConfig(format!("ied must be positive, got {}", self.ied_m)));
        }
        if !(self.cv_min > 0.0 && self.cv_min < self.cv_max && self.cv_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "CV range must satisfy 0 < min < max, got {}:{}",
                self.cv_min, self.cv_max
            )));
        }
        if !(self.corr_threshold > 0.0 && self.corr_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "correlation threshold must lie in (0, 1), got {}",
                self.corr_threshold
            )));
        }
        if !(self.search_tolerance_s > 0.0 && self.search_tolerance_s.is_finite()) {
            return Err(Error::InvalidConfig("search tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Delay bracket `[ied / cv_max, ied / cv_min]` in seconds.
    pub fn delay_bracket_s(&self) -> (f64, f64) {
        (self.ied_m / self.cv_max, self.ied_m / self.cv_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    pub theta_s: f64,
    /// Mean Pearson correlation of adjacent channels after compensation.
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEstimate {
    pub theta_s: f64,
    pub cv_m_s: f64,
    pub correlation: f64,
    pub accepted: bool,
    pub window_start_s: f64,
    pub window_len_s: f64,
    /// DD channel indices, ordered along propagation.
    pub channels_used: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    /// `None` when no estimate was accepted.
    pub mean_cv_m_s: Option<f64>,
    pub n_accepted: usize,
}

/// Cross-spectra `B(k) conj(A(k))` for bins strictly between DC and Nyquist.
struct CrossSpectra {
    n: usize,
    terms: Vec<(f64, f64, f64)>, // (omega per sample, re, im)
}

impl CrossSpectra {
    fn new(dd: &MontageSignal, pairs: &[(usize, usize)]) -> Self {
        let n = dd.n_samples();
        let mut acc = vec![(0.0, 0.0); n / 2];
        let spectra: Vec<_> = {
            let mut idx: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            idx.sort_unstable();
            idx.dedup();
            idx.into_iter()
                .map(|i| (i, fft_real(&demean(&dd.channels[i]))))
                .collect()
        };
        let spec = |i: usize| &spectra.iter().find(|(j, _)| *j == i).expect("spectrum").1;
        for &(a, b) in pairs {
            let (sa, sb) = (spec(a), spec(b));
            for (k, slot) in acc.iter_mut().enumerate().skip(1) {
                let c = sb[k] * sa[k].conj();
                slot.0 += c.re;
                slot.1 += c.im;
            }
        }
        let terms = acc
            .into_iter()
            .enumerate()
            .skip(1)
            .map(|(k, (re, im))| (2.0 * std::f64::consts::PI * k as f64 / n as f64, re, im))
            .collect();
        Self { n, terms }
    }

    /// Alignment score for a delay of `d` samples; its maximiser minimises
    /// the summed misalignment energy.
    fn score(&self, d: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(w, re, im)| {
                let (s, c) = (w * d).sin_cos();
                re * c - im * s
            })
            .sum()
    }
}

fn check_channels(dd: &MontageSignal, channels: &[usize]) -> Result<()> {
    if dd.kind != MontageKind::DoubleDifferential {
        return Err(Error::WrongMontageKind {
            expected: "double-differential",
            found: match dd.kind {
                MontageKind::Monopolar => "monopolar",
                _ => "single-differential",
            },
        });
    }
    if let Some(&bad) = channels.iter().find(|&&c| c >= dd.n_channels()) {
        return Err(Error::InvalidConfig(format!(
            "DD channel {bad} out of range ({} channels)",
            dd.n_channels()
        )));
    }
    Ok(())
}

/// Single delay shared by all channel pairs `(a, b)`, where `b` lags `a`.
pub fn estimate_delay_mle(dd: &MontageSignal, pairs: &[(usize, usize)], cfg: &CvConfig) -> Result<DelayEstimate> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::TooFewChannels { needed: 2, found: 0 });
    }
    let flat: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    check_channels(dd, &flat)?;
    let n = dd.n_samples();
    if n < MIN_WINDOW_SAMPLES {
        return Err(Error::WindowTooShort {
            needed: MIN_WINDOW_SAMPLES,
            found: n,
        });
    }
    let fs = dd.sampling_rate_hz;
    let (lo_s, hi_s) = cfg.delay_bracket_s();
    let (lo, hi) = (lo_s * fs, hi_s * fs);
    let tol = cfg.search_tolerance_s * fs;
    // the slowest delay must sit well inside the window
    if (4.0 * hi).partial_cmp(&(n as f64)) != Some(std::cmp::Ordering::Less) {
        return Err(Error::WindowTooShort {
            needed: (4.0 * hi).ceil() as usize + 1,
            found: n,
        });
    }

    let xs = CrossSpectra::new(dd, pairs);
    debug_assert_eq!(xs.n, n);

    // coarse scan, quarter-sample cells
    let cells = (((hi - lo) / 0.25).ceil() as usize).max(1);
    let grid: Vec<f64> = (0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect();
    let best = grid
        .iter()
        .enumerate()
        .map(|(i, &d)| (i, xs.score(d)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
    let mut a = grid[best.0.saturating_sub(1)];
    let mut b = grid[(best.0 + 1).min(cells)];

    // golden-section refinement on the bracketing cells
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (xs.score(c), xs.score(d));
    let mut iterations = 0;
    while b - a > tol {
        if iterations == MAX_GOLDEN_ITERATIONS {
            return Err(Error::SearchDidNotConverge { iterations });
        }
        iterations += 1;
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = xs.score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = xs.score(d);
        }
    }
    let mut delay = 0.5 * (a + b);
    // keep the grid optimum if the bracket edge beats the refined point
    if best.1 > xs.score(delay) {
        delay = grid[best.0];
    }
    let delay = delay.clamp(lo, hi);

    let margin = hi.ceil() as usize + 16;
    let correlation = pairs
        .iter()
        .map(|&(ia, ib)| {
            let aligned = fractional_shift(&dd.channels[ib], -delay);
            let a = &dd.channels[ia];
            if n > 2 * margin + 16 {
                pearson(&a[margin..n - margin], &aligned[margin..n - margin])
            } else {
                pearson(a, &aligned)
            }
        })
        .sum::<f64>()
        / pairs.len() as f64;

    Ok(DelayEstimate {
        theta_s: delay / fs,
        correlation,
    })
}

/// DD channels spanned by a run of SD channels ordered along propagation.
pub fn dd_channels_for(sd_selection: &[usize]) -> Vec<usize> {
    sd_selection.windows(2).map(|w| w[0].min(w[1])).collect()
}

/// Conduction velocity over `window` (start, length in seconds) from DD
/// channels ordered along the propagation direction.
pub fn estimate_cv(
    dd: &MontageSignal,
    channels: &[usize],
    window: (f64, f64),
    cfg: &CvConfig,
) -> Result<CvEstimate> {
    if channels.len() < 2 {
        return Err(Error::TooFewChannels {
            needed: 2,
            found: channels.len(),
        });
    }
    check_channels(dd, channels)?;
    let fs = dd.sampling_rate_hz;
    let start = (window.0 * fs).round();
    let len = (window.1 * fs).round();
    if start < 0.0 || len < 0.0 || start + len > dd.n_samples() as f64 {
        return Err(Error::InvalidConfig(format!(
            "window [{}, {}+{}] s lies outside the {:.3} s signal",
            window.0,
            window.0,
            window.1,
            dd.duration_s()
        )));
    }
    let (start, len) = (start as usize, len as usize);
    let segment = dd.window(start, start + len);
    let pairs: Vec<(usize, usize)> = channels.windows(2).map(|w| (w[0], w[1])).collect();
    let delay = estimate_delay_mle(&segment, &pairs, cfg)?;
    let cv = (cfg.ied_m / delay.theta_s).clamp(cfg.cv_min, cfg.cv_max);
    Ok(CvEstimate {
        theta_s: delay.theta_s,
        cv_m_s: cv,
        correlation: delay.correlation,
        accepted: delay.correlation > cfg.corr_threshold && (cfg.cv_min..=cfg.cv_max).contains(&cv),
        window_start_s: start as f64 / fs,
        window_len_s: len as f64 / fs,
        channels_used: channels.to_vec(),
    })
}

/// Mean over accepted estimates only.
pub fn average_cv(estimates: &[CvEstimate]) -> CvSummary {
    let accepted: Vec<f64> = estimates.iter().filter(|e| e.accepted).map(|e| e.cv_m_s).collect();
    CvSummary {
        mean_cv_m_s: (!accepted.is_empty()).then(|| accepted.iter().sum::<f64>() / accepted.len() as f64),
        n_accepted: accepted.len(),
    }
}
