//! Indicator time courses over the contraction: epoch grid, per-epoch
//! RMS/MNF/CV series, onset/middle/end spectra and least-squares slopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{dd_channels_for, estimate_cv, CvConfig, CvEstimate};
use crate::error::{Error, Result};
use crate::features::{mnf, psd, rms, PsdConfig, PsdEstimate};
use crate::preprocess::{BandSpec, MontageSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub epoch_len_s: f64,
    pub epoch_spacing_s: f64,
    pub psd_window_s: f64,
}

impl Default for EpochPlan {
    fn default() -> Self {
        Self {
            epoch_len_s: 0.5,
            epoch_spacing_s: 1.0,
            psd_window_s: 1.0,
        }
    }
}

impl EpochPlan {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epoch_len_s > 0.0
            && self.epoch_len_s <= self.epoch_spacing_s
            && self.psd_window_s >= self.epoch_len_s
            && self.epoch_spacing_s.is_finite()
            && self.psd_window_s.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "epoch plan needs 0 < length <= spacing and psd window >= length, got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start_s: f64,
    pub len_s: f64,
}

impl Window {
    pub fn center_s(&self) -> f64 {
        self.start_s + 0.5 * self.len_s
    }
}

const TIME_EPS: f64 = 1e-9;

/// Non-overlapping epochs starting at multiples of the spacing, as many as fit.
pub fn plan_epochs(duration_s: f64, plan: &EpochPlan) -> Result<Vec<Window>> {
    plan.validate()?;
    let needed = plan.epoch_spacing_s + plan.epoch_len_s;
    if duration_s + TIME_EPS < needed {
        return Err(Error::DurationTooShort {
            needed,
            found: duration_s,
        });
    }
    Ok((0..)
        .map(|k| Window {
            start_s: k as f64 * plan.epoch_spacing_s,
            len_s: plan.epoch_len_s,
        })
        .take_while(|w| w.start_s + w.len_s <= duration_s + TIME_EPS)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSeries {
    /// Epoch centers relative to the analysed region start.
    pub times_s: Vec<f64>,
    /// Mean over the selected SD channels.
    pub mnf_hz: Vec<f64>,
    pub rms_mv: Vec<f64>,
    /// `[epoch][channel]`, same channel order as the selection.
    pub mnf_per_channel: Vec<Vec<f64>>,
    pub rms_per_channel: Vec<Vec<f64>>,
    pub cv: Vec<CvEstimate>,
}

impl EpochSeries {
    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn cv_accepted(&self) -> Vec<bool> {
        self.cv.iter().map(|e| e.accepted).collect()
    }
}

fn sample_range(w: &Window, rate: f64, n: usize) -> (usize, usize) {
    let start = ((w.start_s * rate).round() as usize).min(n);
    let end = (start + (w.len_s * rate).round() as usize).min(n);
    (start, end)
}

/// Per-epoch RMS and MNF averaged over the selected SD channels, and gated CV
/// from the DD channels those SD channels span.
pub fn epoch_series(
    sd: &MontageSignal,
    dd: &MontageSignal,
    sd_channels: &[usize],
    plan: &EpochPlan,
    cv_cfg: &CvConfig,
    band: &BandSpec,
    psd_cfg: &PsdConfig,
) -> Result<EpochSeries> {
    if sd_channels.is_empty() {
        return Err(Error::TooFewChannels { needed: 1, found: 0 });
    }
    let windows = plan_epochs(sd.duration_s(), plan)?;
    let rate = sd.sampling_rate_hz;
    let dd_channels = dd_channels_for(sd_channels);

    struct Row {
        mnf: Vec<f64>,
        rms: Vec<f64>,
        cv: CvEstimate,
    }
    let rows = windows
        .par_iter()
        .map(|w| {
            let (start, end) = sample_range(w, rate, sd.n_samples());
            let mut mnfs = Vec::with_capacity(sd_channels.len());
            let mut rmss = Vec::with_capacity(sd_channels.len());
            for &c in sd_channels {
                let x = &sd.channels[c][start..end];
                rmss.push(rms(x)?);
                mnfs.push(mnf(&psd(x, rate, band, false, psd_cfg)?)?);
            }
            let cv = estimate_cv(dd, &dd_channels, (w.start_s, w.len_s), cv_cfg)?;
            Ok(Row {
                mnf: mnfs,
                rms: rmss,
                cv,
            })
        })
        .collect::<Result<Vec<Row>>>()?;

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(EpochSeries {
        times_s: windows.iter().map(Window::center_s).collect(),
        mnf_hz: rows.iter().map(|r| mean(&r.mnf)).collect(),
        rms_mv: rows.iter().map(|r| mean(&r.rms)).collect(),
        mnf_per_channel: rows.iter().map(|r| r.mnf.clone()).collect(),
        rms_per_channel: rows.iter().map(|r| r.rms.clone()).collect(),
        cv: rows.into_iter().map(|r| r.cv).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    /// Units per second.
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
}

/// Ordinary least-squares line through `(times, values)`.
pub fn fit_slope(times: &[f64], values: &[f64]) -> Result<LineFit> {
    let n = times.len().min(values.len());
    let finite = times[..n]
        .iter()
        .zip(&values[..n])
        .filter(|(t, v)| t.is_finite() && v.is_finite())
        .count();
    if finite < 3 || finite != times.len() || finite != values.len() {
        return Err(Error::TooFewPoints { needed: 3, found: finite });
    }
    let nf = n as f64;
    let t_mean = times.iter().sum::<f64>() / nf;
    let v_mean = values.iter().sum::<f64>() / nf;
    let (mut stt, mut stv) = (0.0, 0.0);
    for (t, v) in times.iter().zip(values) {
        let dt = t - t_mean;
        stt += dt * dt;
        stv += dt * (v - v_mean);
    }
    if stt <= 0.0 {
        return Err(Error::TooFewPoints { needed: 3, found: 1 });
    }
    let slope = stv / stt;
    Ok(LineFit {
        slope,
        intercept: v_mean - slope * t_mean,
        n_points: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdSnapshots {
    pub onset: PsdEstimate,
    pub middle: PsdEstimate,
    pub end: PsdEstimate,
    pub windows: [Window; 3],
}

/// Normalised spectra at the start, middle and end of the signal, averaged
/// over the selected channels.
pub fn psd_snapshots(
    sd: &MontageSignal,
    sd_channels: &[usize],
    plan: &EpochPlan,
    band: &BandSpec,
    psd_cfg: &PsdConfig,
) -> Result<PsdSnapshots> {
    plan.validate()?;
    if sd_channels.is_empty() {
        return Err(Error::TooFewChannels { needed: 1, found: 0 });
    }
    let rate = sd.sampling_rate_hz;
    let n = sd.n_samples();
    let duration = sd.duration_s();
    let needed = 3.0 * plan.psd_window_s;
    if duration + TIME_EPS < needed {
        return Err(Error::DurationTooShort {
            needed,
            found: duration,
        });
    }
    let len = ((plan.psd_window_s * rate).round() as usize).min(n);
    let starts = [0, (n - len) / 2, n - len];
    let estimate = |start: usize| -> Result<PsdEstimate> {
        let per_channel = sd_channels
            .iter()
            .map(|&c| psd(&sd.channels[c][start..start + len], rate, band, true, psd_cfg))
            .collect::<Result<Vec<_>>>()?;
        PsdEstimate::average(&per_channel)
    };
    let windows = starts.map(|s| Window {
        start_s: s as f64 / rate,
        len_s: len as f64 / rate,
    });
    Ok(PsdSnapshots {
        onset: estimate(starts[0])?,
        middle: estimate(starts[1])?,
        end: estimate(starts[2])?,
        windows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub mnf: LineFit,
    pub rms: LineFit,
    /// Fit over accepted CV epochs only; `None` when fewer than three survive.
    pub cv: Option<LineFit>,
    pub n_epochs: usize,
    pub snapshot_mnf_hz: [f64; 3],
    pub psd_snapshots: PsdSnapshots,
}

pub fn trend_report(series: &EpochSeries, snapshots: PsdSnapshots) -> Result<TrendReport> {
    let mnf_fit = fit_slope(&series.times_s, &series.mnf_hz)?;
    let rms_fit = fit_slope(&series.times_s, &series.rms_mv)?;
    let (t, v): (Vec<f64>, Vec<f64>) = series
        .times_s
        .iter()
        .zip(&series.cv)
        .filter(|(_, e)| e.accepted)
        .map(|(&t, e)| (t, e.cv_m_s))
        .unzip();
    let cv_fit = if t.len() >= 3 { Some(fit_slope(&t, &v)?) } else { None };
    Ok(TrendReport {
        mnf: mnf_fit,
        rms: rms_fit,
        cv: cv_fit,
        n_epochs: series.len(),
        snapshot_mnf_hz: [
            mnf(&snapshots.onset)?,
            mnf(&snapshots.middle)?,
            mnf(&snapshots.end)?,
        ],
        psd_snapshots: snapshots,
    })
}
