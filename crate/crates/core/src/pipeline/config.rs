//! Analysis configuration and its `key = value` file format.
//!
//! Keys are the long CLI flag names without the leading dashes:
//!
//! ```text
//! # comments start with '#'
//! band = 20:400
//! filter-order = 4
//! iz-index = auto        # or an SD channel index
//! select-k = 3
//! column = auto          # or a grid column index
//! psd-seg = 256
//! psd-overlap = 0.5
//! corr-threshold = 0.75
//! cv-range = 2:8
//! epoch-len = 0.5
//! epoch-gap = 1.0
//! psd-window = 1.0
//! ```
//!
//! Later assignments override earlier ones, so applying the file and then the
//! command-line flags gives flag > file > default.

use serde::{Deserialize, Serialize};

use crate::cv::CvConfig;
use crate::error::{Error, Result};
use crate::features::PsdConfig;
use crate::preprocess::BandSpec;
use crate::timecourse::EpochPlan;

pub const CONFIG_KEYS: [&str; 12] = [
    "band",
    "filter-order",
    "iz-index",
    "select-k",
    "column",
    "psd-seg",
    "psd-overlap",
    "corr-threshold",
    "cv-range",
    "epoch-len",
    "epoch-gap",
    "psd-window",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub band: BandSpec,
    /// Forced innervation-zone SD index; `None` detects it.
    pub iz_index: Option<usize>,
    pub select_k: usize,
    /// Forced grid column; `None` picks the strongest.
    pub column: Option<usize>,
    pub psd: PsdConfig,
    pub corr_threshold: f64,
    pub cv_min: f64,
    pub cv_max: f64,
    pub search_tolerance_s: f64,
    pub epochs: EpochPlan,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let cv = CvConfig::default();
        Self {
            band: BandSpec::default(),
            iz_index: None,
            select_k: 3,
            column: None,
            psd: PsdConfig::default(),
            corr_threshold: cv.corr_threshold,
            cv_min: cv.cv_min,
            cv_max: cv.cv_max,
            search_tolerance_s: cv.search_tolerance_s,
            epochs: EpochPlan::default(),
        }
    }
}

fn invalid(key: &str, value: &str, what: &str) -> Error {
    Error::InvalidConfig(format!("`{key}` expects {what}, got `{value}`"))
}

fn number<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| invalid(key, value, what))
}

fn range(key: &str, value: &str) -> Result<(f64, f64)> {
    let (a, b) = value.split_once(':').ok_or_else(|| invalid(key, value, "`low:high`"))?;
    Ok((
        number(key, a.trim(), "`low:high`")?,
        number(key, b.trim(), "`low:high`")?,
    ))
}

fn auto_or<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        number(key, value, "`auto` or a non-negative integer").map(Some)
    }
}

impl AnalysisConfig {
    /// Sets one option by its flag name.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "band" => {
                let (lo, hi) = range(key, value)?;
                self.band.low_hz = lo;
                self.band.high_hz = hi;
            }
            "filter-order" => self.band.order = number(key, value, "a positive integer")?,
            "iz-index" => self.iz_index = auto_or(key, value)?,
            "select-k" => self.select_k = number(key, value, "an integer >= 3")?,
            "column" => self.column = auto_or(key, value)?,
            "psd-seg" => self.psd.segment_len = number(key, value, "a segment length in samples")?,
            "psd-overlap" => self.psd.overlap = number(key, value, "a fraction in [0, 1)")?,
            "corr-threshold" => self.corr_threshold = number(key, value, "a ratio in (0, 1)")?,
            "cv-range" => {
                let (lo, hi) = range(key, value)?;
                self.cv_min = lo;
                self.cv_max = hi;
            }
            "epoch-len" => self.epochs.epoch_len_s = number(key, value, "seconds")?,
            "epoch-gap" => self.epochs.epoch_spacing_s = number(key, value, "seconds")?,
            "psd-window" => self.epochs.psd_window_s = number(key, value, "seconds")?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown option `{key}`; known options: {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every assignment of a config file to `self`.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("config line {}: expected `key = value`, got `{line}`", n + 1))
            })?;
            self.apply(key.trim(), value).map_err(|e| match e {
                Error::InvalidConfig(msg) => Error::InvalidConfig(format!("config line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_file_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(text)?;
        Ok(cfg)
    }

    /// Checks everything that does not depend on the recording.
    pub fn validate(&self) -> Result<()> {
        self.psd.validate()?;
        self.epochs.validate()?;
        self.cv_config(CvConfig::default().ied_m).validate()?;
        if self.select_k < 3 {
            return Err(Error::InvalidConfig(format!(
                "select-k must be at least 3, got {}",
                self.select_k
            )));
        }
        if self.band.order == 0 || !(self.band.low_hz > 0.0 && self.band.low_hz < self.band.high_hz) {
            return Err(Error::InvalidConfig(format!(
                "band must satisfy 0 < low < high with order >= 1, got {}:{} order {}",
                self.band.low_hz, self.band.high_hz, self.band.order
            )));
        }
        Ok(())
    }

    pub fn cv_config(&self, ied_m: f64) -> CvConfig {
        CvConfig {
            ied_m,
            cv_min: self.cv_min,
            cv_max: self.cv_max,
            corr_threshold: self.corr_threshold,
            search_tolerance_s: self.search_tolerance_s,
        }
    }

    /// The configuration in file format, one line per key.
    pub fn to_file_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("auto".to_string(), |i| i.to_string());
        [
            format!("band = {}:{}", self.band.low_hz, self.band.high_hz),
            format!("filter-order = {}", self.band.order),
            format!("iz-index = {}", opt(self.iz_index)),
            format!("select-k = {}", self.select_k),
            format!("column = {}", opt(self.column)),
            format!("psd-seg = {}", self.psd.segment_len),
            format!("psd-overlap = {}", self.psd.overlap),
            format!("corr-threshold = {}", self.corr_threshold),
            format!("cv-range = {}:{}", self.cv_min, self.cv_max),
            format!("epoch-len = {}", self.epochs.epoch_len_s),
            format!("epoch-gap = {}", self.epochs.epoch_spacing_s),
            format!("psd-window = {}", self.epochs.psd_window_s),
        ]
        .join("\n")
            + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults_and_later_lines_win() {
        let cfg = AnalysisConfig::from_file_text(
            "# test\nband = 10:300\nselect-k=4\n\ncv-range = 3:6 # narrower\nselect-k = 5\niz-index = 7\n",
        )
        .unwrap();
        assert_eq!((cfg.band.low_hz, cfg.band.high_hz), (10.0, 300.0));
        assert_eq!(cfg.select_k, 5);
        assert_eq!((cfg.cv_min, cfg.cv_max), (3.0, 6.0));
        assert_eq!(cfg.iz_index, Some(7));
        assert_eq!(cfg.column, None);
    }

    #[test]
    fn file_text_round_trips() {
        let mut cfg = AnalysisConfig::default();
        cfg.apply("column", "3").unwrap();
        cfg.apply("psd-overlap", "0.25").unwrap();
        cfg.apply("epoch-gap", "1.5").unwrap();
        let back = AnalysisConfig::from_file_text(&cfg.to_file_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(
            AnalysisConfig::from_file_text(&AnalysisConfig::default().to_file_text()).unwrap(),
            AnalysisConfig::default()
        );
    }

    #[test]
    fn every_key_is_accepted() {
        let text = AnalysisConfig::default().to_file_text();
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap().trim()).collect();
        assert_eq!(keys, CONFIG_KEYS);
    }

    #[test]
    fn bad_lines_are_rejected() {
        for text in ["band = 20", "select-k = three", "nonsense = 1", "just words", "iz-index = -1"] {
            assert!(
                matches!(AnalysisConfig::from_file_text(text), Err(Error::InvalidConfig(_))),
                "{text}"
            );
        }
        let cfg = AnalysisConfig {
            select_k: 2,
            ..AnalysisConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
