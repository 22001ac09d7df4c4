//! Grid recordings: geometry, trial metadata, ingestion and trimming.
//!
//! Monopolar channels are stored column-major along the fiber axis, so the
//! channel at grid position `(row, col)` lives at index `col * rows + row`.
//! Pads listed in [`GridGeometry::missing_pads`] have no channel.

mod io;
mod trim;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_trial, parse_metadata, parse_trial_csv, save_trial, write_trial_csv, MetadataFile};
pub use trim::trim_active_region;

/// Upper band edge assumed when validating sampling rates at load time.
pub const DEFAULT_BAND_HIGH_HZ: f64 = 400.0;

pub const ALLOWED_MVC_PERCENT: [u32; 6] = [10, 20, 40, 60, 70, 90];

/// Direction along which action potentials propagate on the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberAxis {
    /// Propagation runs down each column, from row 0 towards the last row.
    #[default]
    AlongColumns,
}

/// Highest sampling rate accepted from a metadata file, Hz.
pub const MAX_RATE_HZ: f64 = 100_000.0;

/// Widest electrode spacing accepted from a metadata file, m.
pub const MAX_IED_M: f64 = 0.05;

/// Largest grid accepted from a metadata file.
pub const MAX_PADS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Inter-electrode distance in meters.
    pub ied_m: f64,
    pub fiber_axis: FiberAxis,
    /// `(row, col)` positions without an electrode.
    pub missing_pads: Vec<(usize, usize)>,
}

impl Default for GridGeometry {
    /// 13 x 5 grid, 8 mm spacing, 64 pads (corner pad `(0, 0)` absent).
    fn default() -> Self {
        Self {
            rows: 13,
            cols: 5,
            ied_m: 0.008,
            fiber_axis: FiberAxis::AlongColumns,
            missing_pads: vec![(0, 0)],
        }
    }
}

impl GridGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 4 {
            return Err(Error::InvalidMetadata(format!(
                "grid needs at least 4 rows along the fiber axis, got {}",
                self.rows
            )));
        }
        if self.cols == 0 {
            return Err(Error::InvalidMetadata("grid has no columns".into()));
        }
        if self.rows.checked_mul(self.cols).is_none_or(|n| n > MAX_PADS) {
            return Err(Error::InvalidMetadata(format!(
                "grid of {}x{} exceeds {MAX_PADS} pads",
                self.rows, self.cols
            )));
        }
        if !(self.ied_m > 0.0 && self.ied_m <= MAX_IED_M) {
            return Err(Error::InvalidMetadata(format!(
                "inter-electrode distance must lie in (0, {MAX_IED_M}] m, got {}",
                self.ied_m
            )));
        }
        for &(r, c) in &self.missing_pads {
            if r >= self.rows || c >= self.cols {
                return Err(Error::InvalidMetadata(format!(
                    "missing pad ({r},{c}) lies outside the {}x{} grid",
                    self.rows, self.cols
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn channel_index(&self, row: usize, col: usize) -> usize {
        col * self.rows + row
    }

    pub fn n_positions(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing_pads.contains(&(row, col))
    }

    /// Number of pads that carry a channel.
    pub fn n_present(&self) -> usize {
        (0..self.cols)
            .flat_map(|c| (0..self.rows).map(move |r| (r, c)))
            .filter(|&(r, c)| !self.is_missing(r, c))
            .count()
    }

    /// Present pads in column-major order.
    pub fn present_pads(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.cols)
            .flat_map(move |c| (0..self.rows).map(move |r| (r, c)))
            .filter(move |&(r, c)| !self.is_missing(r, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    BeforeFatigue,
    Fatigue,
    AfterFatigue,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::BeforeFatigue => "before_fatigue",
            Condition::Fatigue => "fatigue",
            Condition::AfterFatigue => "after_fatigue",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrimMode {
    Fixed,
    ForceThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrimPolicy {
    pub mode: TrimMode,
    /// Seconds removed from each end in `Fixed` mode.
    pub fixed_trim_s: f64,
    /// Fraction of the plateau force that counts as active.
    pub force_fraction: f64,
}

impl Default for TrimPolicy {
    fn default() -> Self {
        Self {
            mode: TrimMode::Fixed,
            fixed_trim_s: 0.5,
            force_fraction: 0.5,
        }
    }
}

impl TrimPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_trim_s.is_finite() && self.fixed_trim_s >= 0.0) {
            return Err(Error::InvalidMetadata(format!(
                "fixed trim must be >= 0, got {}",
                self.fixed_trim_s
            )));
        }
        if !(self.force_fraction > 0.0 && self.force_fraction < 1.0) {
            return Err(Error::InvalidMetadata(format!(
                "force fraction must lie in (0, 1), got {}",
                self.force_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetadata {
    pub subject_id: String,
    pub mvc_percent: u32,
    pub condition: Condition,
    pub sampling_rate_hz: f64,
    pub target_force_n: Option<f64>,
    pub trim: TrimPolicy,
}

impl TrialMetadata {
    pub fn validate(&self) -> Result<()> {
        if !ALLOWED_MVC_PERCENT.contains(&self.mvc_percent) {
            return Err(Error::InvalidMetadata(format!(
                "mvc_percent must be one of {ALLOWED_MVC_PERCENT:?}, got {}",
                self.mvc_percent
            )));
        }
        if self.mvc_percent == 70 && self.condition != Condition::Fatigue {
            return Err(Error::InvalidMetadata(
                "the 70% MVC trial is the fatigue (exhaustion) test".into(),
            ));
        }
        if self.condition == Condition::AfterFatigue && self.mvc_percent != 10 {
            return Err(Error::InvalidMetadata(
                "after-fatigue trials are recorded at 10% MVC".into(),
            ));
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 2.0 * DEFAULT_BAND_HIGH_HZ)
        {
            return Err(Error::UnsupportedRate {
                rate: self.sampling_rate_hz,
                band_high: DEFAULT_BAND_HIGH_HZ,
            });
        }
        if self.sampling_rate_hz > MAX_RATE_HZ {
            return Err(Error::InvalidMetadata(format!(
                "sampling rate {} Hz exceeds the supported {MAX_RATE_HZ} Hz",
                self.sampling_rate_hz
            )));
        }
        if let Some(f) = self.target_force_n {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::InvalidMetadata(format!("target force must be >= 0, got {f}")));
            }
        }
        self.trim.validate()
    }
}

/// One trial of monopolar grid data. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRecording {
    pub geometry: GridGeometry,
    pub meta: TrialMetadata,
    /// Indexed by [`GridGeometry::channel_index`]; `None` at missing pads.
    channels: Vec<Option<Vec<f64>>>,
    force: Option<Vec<f64>>,
    /// Time of the first sample in seconds.
    pub start_time_s: f64,
}

impl GridRecording {
    /// Builds a recording, checking shapes and finiteness.
    pub fn new(
        geometry: GridGeometry,
        meta: TrialMetadata,
        channels: Vec<Option<Vec<f64>>>,
        force: Option<Vec<f64>>,
        start_time_s: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        if channels.len() != geometry.n_positions() {
            return Err(Error::MetadataMismatch(format!(
                "expected {} grid positions, got {}",
                geometry.n_positions(),
                channels.len()
            )));
        }
        let mut n_samples = None;
        for c in 0..geometry.cols {
            for r in 0..geometry.rows {
                let ch = &channels[geometry.channel_index(r, c)];
                match (geometry.is_missing(r, c), ch) {
                    (true, Some(_)) => {
                        return Err(Error::MetadataMismatch(format!(
                            "pad ({r},{c}) is declared missing but carries data"
                        )))
                    }
                    (false, None) => {
                        return Err(Error::MetadataMismatch(format!("pad ({r},{c}) has no data")))
                    }
                    (false, Some(x)) => {
                        if *n_samples.get_or_insert(x.len()) != x.len() {
                            return Err(Error::MalformedFile("channels differ in length".into()));
                        }
                        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
                            return Err(Error::NonFiniteSample {
                                line: i + 1,
                                column: format!("e_{r}_{c}"),
                            });
                        }
                    }
                    (true, None) => {}
                }
            }
        }
        let n = n_samples.unwrap_or(0);
        if n == 0 {
            return Err(Error::EmptySignal);
        }
        if let Some(f) = &force {
            if f.len() != n {
                return Err(Error::MalformedFile("force channel length differs from EMG".into()));
            }
            if let Some(i) = f.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample {
                    line: i + 1,
                    column: "force".into(),
                });
            }
        }
        Ok(Self {
            geometry,
            meta,
            channels,
            force,
            start_time_s,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.channels.iter().flatten().next().map_or(0, Vec::len)
    }

    pub fn sampling_rate(&self) -> f64 {
        self.meta.sampling_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate()
    }

    pub fn channel(&self, row: usize, col: usize) -> Option<&[f64]> {
        if row >= self.geometry.rows || col >= self.geometry.cols {
            return None;
        }
        self.channels[self.geometry.channel_index(row, col)].as_deref()
    }

    pub fn channels(&self) -> &[Option<Vec<f64>>] {
        &self.channels
    }

    pub fn force(&self) -> Option<&[f64]> {
        self.force.as_deref()
    }

    /// Copy of the sample range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> GridRecording {
        let channels = self
            .channels
            .iter()
            .map(|c| c.as_ref().map(|x| x[start..end].to_vec()))
            .collect();
        GridRecording {
            geometry: self.geometry.clone(),
            meta: self.meta.clone(),
            channels,
            force: self.force.as_ref().map(|f| f[start..end].to_vec()),
            start_time_s: self.start_time_s + start as f64 / self.sampling_rate(),
        }
    }

    /// Applies `f` to every EMG channel; force is carried over untouched.
    pub fn map_channels<F>(&self, f: F) -> Result<GridRecording>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        use rayon::prelude::*;
        let channels = self
            .channels
            .par_iter()
            .map(|c| c.as_deref().map(&f).transpose())
            .collect::<Result<Vec<_>>>()?;
        Ok(GridRecording {
            geometry: self.geometry.clone(),
            meta: self.meta.clone(),
            channels,
            force: self.force.clone(),
            start_time_s: self.start_time_s,
        })
    }
}
