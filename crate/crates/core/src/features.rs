//! Amplitude and spectral indicators: RMS, averaged-periodogram PSD, mean and
//! median frequency.
//!
//! Band integrals use the trapezoidal rule on the PSD grid, clipped to the
//! exact band edges with linearly interpolated end points. Normalisation,
//! MNF and MDF all share that same quadrature, so a normalised PSD integrates
//! to one under it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::{demean, fft_real};
use crate::error::{Error, Result};
use crate::preprocess::BandSpec;

/// Averaged modified periodogram settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdConfig {
    pub segment_len: usize,
    /// Fractional overlap between consecutive segments, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            segment_len: 256,
            overlap: 0.5,
        }
    }
}

impl PsdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segment_len < 8 {
            return Err(Error::InvalidConfig(format!(
                "PSD segment length must be at least 8, got {}",
                self.segment_len
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidConfig(format!(
                "PSD overlap must lie in [0, 1), got {}",
                self.overlap
            )));
        }
        Ok(())
    }

    fn step(&self) -> usize {
        let overlap = (self.segment_len as f64 * self.overlap).round() as usize;
        (self.segment_len - overlap).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Uniform grid whose first and last bins bracket the band.
    pub freqs_hz: Vec<f64>,
    /// One-sided density, mV^2/Hz (or 1/Hz when normalised).
    pub power: Vec<f64>,
    pub resolution_hz: f64,
    pub band: BandSpec,
    pub normalized: bool,
}

impl PsdEstimate {
    /// Grid points clipped to the band, with interpolated values at the edges.
    fn band_points(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = (self.band.low_hz, self.band.high_hz);
        let interp = |f: f64| -> f64 {
            let i = self
                .freqs_hz
                .windows(2)
                .position(|w| w[0] <= f && f <= w[1])
                .unwrap_or(0);
            let (f0, f1) = (self.freqs_hz[i], self.freqs_hz[i + 1]);
            let t = if f1 > f0 { (f - f0) / (f1 - f0) } else { 0.0 };
            self.power[i] + t * (self.power[i + 1] - self.power[i])
        };
        let mut pts = Vec::with_capacity(self.freqs_hz.len() + 2);
        pts.push((lo, interp(lo)));
        pts.extend(
            self.freqs_hz
                .iter()
                .zip(&self.power)
                .filter(|(&f, _)| f > lo && f < hi)
                .map(|(&f, &p)| (f, p)),
        );
        pts.push((hi, interp(hi)));
        pts
    }

    /// Trapezoidal integral of the density over the band.
    pub fn band_power(&self) -> f64 {
        self.band_points()
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum()
    }

    /// Copy scaled to unit band power.
    pub fn normalize(&self) -> Result<PsdEstimate> {
        let total = self.band_power();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::ZeroPower);
        }
        Ok(PsdEstimate {
            power: self.power.iter().map(|p| p / total).collect(),
            normalized: true,
            ..self.clone()
        })
    }

    /// Bin-wise mean of estimates sharing one grid.
    pub fn average(estimates: &[PsdEstimate]) -> Result<PsdEstimate> {
        let first = estimates.first().ok_or(Error::EmptySignal)?;
        if estimates.iter().any(|e| e.freqs_hz != first.freqs_hz) {
            return Err(Error::Invariant("averaging PSDs on different grids".into()));
        }
        let n = estimates.len() as f64;
        let power = (0..first.power.len())
            .map(|k| estimates.iter().map(|e| e.power[k]).sum::<f64>() / n)
            .collect();
        Ok(PsdEstimate {
            power,
            normalized: estimates.iter().all(|e| e.normalized),
            ..first.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub rms_mv: f64,
    pub mnf_hz: f64,
    pub mdf_hz: f64,
    pub psd: PsdEstimate,
    pub window_start_s: f64,
    pub window_len_s: f64,
}

pub fn rms(signal: &[f64]) -> Result<f64> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    Ok((signal.iter().map(|v| v * v).sum::<f64>() / signal.len() as f64).sqrt())
}

/// Averaged periodogram of mean-removed, Hann-tapered segments, restricted to
/// the bins bracketing `band`.
pub fn psd(signal: &[f64], rate: f64, band: &BandSpec, normalize: bool, cfg: &PsdConfig) -> Result<PsdEstimate> {
    cfg.validate()?;
    band.validate(rate)?;
    let seg = cfg.segment_len;
    if signal.len() < 2 * seg {
        return Err(Error::SignalTooShort {
            needed: 2 * seg,
            found: signal.len(),
        });
    }
    let x = demean(signal);
    let taper: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos())
        .collect();
    let taper_power: f64 = taper.iter().map(|w| w * w).sum();

    let resolution = rate / seg as f64;
    let k_lo = (band.low_hz / resolution).floor() as usize;
    let k_hi = ((band.high_hz / resolution).ceil() as usize).min(seg / 2);

    let step = cfg.step();
    let n_segments = (x.len() - seg) / step + 1;
    let mut acc = vec![0.0; k_hi - k_lo + 1];
    let mut buf = vec![0.0; seg];
    for s in 0..n_segments {
        let chunk = &x[s * step..s * step + seg];
        for ((b, v), w) in buf.iter_mut().zip(chunk).zip(&taper) {
            *b = v * w;
        }
        let spec = fft_real(&buf);
        for (a, k) in acc.iter_mut().zip(k_lo..=k_hi) {
            *a += spec[k].norm_sqr();
        }
    }
    let power: Vec<f64> = acc
        .iter()
        .zip(k_lo..=k_hi)
        .map(|(a, k)| {
            let one_sided = if k == 0 || (seg.is_multiple_of(2) && k == seg / 2) { 1.0 } else { 2.0 };
            one_sided * a / (n_segments as f64 * rate * taper_power)
        })
        .collect();
    let est = PsdEstimate {
        freqs_hz: (k_lo..=k_hi).map(|k| k as f64 * resolution).collect(),
        power,
        resolution_hz: resolution,
        band: *band,
        normalized: false,
    };
    if normalize {
        est.normalize()
    } else {
        Ok(est)
    }
}

/// Power-weighted mean frequency over the band.
pub fn mnf(psd: &PsdEstimate) -> Result<f64> {
    let pts = psd.band_points();
    let (mut num, mut den) = (0.0, 0.0);
    for w in pts.windows(2) {
        let ((f0, p0), (f1, p1)) = (w[0], w[1]);
        num += 0.5 * (f1 - f0) * (f0 * p0 + f1 * p1);
        den += 0.5 * (f1 - f0) * (p0 + p1);
    }
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::ZeroPower);
    }
    Ok((num / den).clamp(psd.band.low_hz, psd.band.high_hz))
}

/// Frequency splitting band power in half, interpolated inside the crossing
/// interval.
pub fn mdf(psd: &PsdEstimate) -> Result<f64> {
    let pts = psd.band_points();
    let areas: Vec<f64> = pts
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::ZeroPower);
    }
    let half = 0.5 * total;
    let mut cum = 0.0;
    for (i, &a) in areas.iter().enumerate() {
        if cum + a >= half && a > 0.0 {
            let t = (half - cum) / a;
            let (f0, f1) = (pts[i].0, pts[i + 1].0);
            return Ok(f0 + t * (f1 - f0));
        }
        cum += a;
    }
    Ok(psd.band.high_hz)
}

/// RMS, PSD, MNF and MDF of one analysis window.
pub fn feature_set(
    signal: &[f64],
    rate: f64,
    band: &BandSpec,
    cfg: &PsdConfig,
    window_start_s: f64,
) -> Result<FeatureSet> {
    let est = psd(signal, rate, band, true, cfg)?;
    Ok(FeatureSet {
        rms_mv: rms(signal)?,
        mnf_hz: mnf(&est)?,
        mdf_hz: mdf(&est)?,
        psd: est,
        window_start_s,
        window_len_s: signal.len() as f64 / rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_psd(density: impl Fn(f64) -> f64) -> PsdEstimate {
        let freqs: Vec<f64> = (0..=520).map(|i| i as f64).collect();
        PsdEstimate {
            power: freqs.iter().map(|&f| density(f)).collect(),
            freqs_hz: freqs,
            resolution_hz: 1.0,
            band: BandSpec::default(),
            normalized: false,
        }
    }

    #[test]
    fn rms_values() {
        assert_eq!(rms(&[3.0; 10]).unwrap(), 3.0);
        assert!((rms(&[3.0, -4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(rms(&[]), Err(Error::EmptySignal)));
    }

    #[test]
    fn flat_density_has_midband_mnf_and_mdf() {
        let p = grid_psd(|_| 1.0);
        assert!((mnf(&p).unwrap() - 210.0).abs() < 1e-9);
        assert!((mdf(&p).unwrap() - 210.0).abs() < 1e-9);
        assert!((p.band_power() - 380.0).abs() < 1e-9);
    }

    #[test]
    fn quarter_below_100_hz_puts_median_at_200() {
        // 25% of the power uniformly on [20, 100], 75% uniformly on [100, 400]
        let p = grid_psd(|f| if f < 100.0 { 0.25 / 80.0 } else { 0.75 / 300.0 });
        let m = mdf(&p).unwrap();
        assert!((m - 200.0).abs() < 1.0, "{m}");
    }

    #[test]
    fn zero_power_is_an_error() {
        let p = grid_psd(|_| 0.0);
        assert!(matches!(mnf(&p), Err(Error::ZeroPower)));
        assert!(matches!(mdf(&p), Err(Error::ZeroPower)));
        assert!(matches!(p.normalize(), Err(Error::ZeroPower)));
    }

    #[test]
    fn short_signal_is_rejected() {
        let r = psd(&[0.0; 300], 2048.0, &BandSpec::default(), false, &PsdConfig::default());
        assert!(matches!(r, Err(Error::SignalTooShort { needed: 512, found: 300 })));
    }

    #[test]
    fn grid_brackets_band() {
        let x: Vec<f64> = (0..2048).map(|i| ((i * 7919) % 101) as f64).collect();
        let p = psd(&x, 2048.0, &BandSpec::default(), true, &PsdConfig::default()).unwrap();
        assert_eq!(p.resolution_hz, 8.0);
        assert_eq!(p.freqs_hz.first(), Some(&16.0));
        assert_eq!(p.freqs_hz.last(), Some(&400.0));
        assert!(p.power.iter().all(|&v| v >= 0.0));
        assert!((p.band_power() - 1.0).abs() < 1e-9);
    }
}
