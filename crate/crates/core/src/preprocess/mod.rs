//! Band-pass conditioning, spatial montages, innervation-zone detection and
//! analysis-channel selection.

pub mod filter;
mod iz;
mod montage;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::GridRecording;

pub use iz::{detect_innervation_zone, select_channels, selection_side, IzReport, Side};
pub use montage::{choose_column, double_differential, monopolar, single_differential, MontageKind, MontageSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self {
            low_hz: 20.0,
            high_hz: 400.0,
            order: 4,
        }
    }
}

impl BandSpec {
    pub fn validate(&self, rate: f64) -> Result<()> {
        let ok = self.order >= 1
            && self.low_hz.is_finite()
            && self.high_hz.is_finite()
            && 0.0 < self.low_hz
            && self.low_hz < self.high_hz
            && self.high_hz < rate / 2.0;
        if ok {
            Ok(())
        } else {
            Err(Error::BandInvalid {
                low: self.low_hz,
                high: self.high_hz,
                order: self.order,
                rate,
            })
        }
    }
}

/// Zero-phase band-pass of a single channel.
pub fn bandpass_signal(x: &[f64], rate: f64, band: &BandSpec) -> Result<Vec<f64>> {
    band.validate(rate)?;
    let sections = filter::design_bandpass(band.order, band.low_hz, band.high_hz, rate);
    // one period of the low corner, at least 3 samples per filter tap
    let pad = ((rate / band.low_hz).ceil() as usize).max(3 * (2 * sections.len() + 1));
    Ok(filter::filtfilt(&sections, x, pad))
}

/// Zero-phase band-pass of every EMG channel; force is left untouched.
pub fn bandpass(rec: &GridRecording, band: &BandSpec) -> Result<GridRecording> {
    let rate = rec.sampling_rate();
    band.validate(rate)?;
    rec.map_channels(|x| bandpass_signal(x, rate, band))
}
