//! Cross-trial tables and the flat CSV exports of a session.

use serde::{Deserialize, Serialize};

use super::{SessionReport, TrialReport};
use crate::signal::Condition;

/// Indicators per MVC level (whole-signal and epoch-mean values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub mvc_percent: u32,
    pub condition: Condition,
    pub rms_mv: f64,
    pub mnf_hz: f64,
    pub mdf_hz: f64,
    pub mean_cv_m_s: Option<f64>,
    pub n_cv_accepted: usize,
    pub epoch_mean_rms_mv: f64,
    pub epoch_mean_mnf_hz: f64,
}

impl LevelRow {
    pub fn from_trial(t: &TrialReport) -> Self {
        let w = &t.whole_signal;
        Self {
            mvc_percent: t.mvc_percent,
            condition: t.condition,
            rms_mv: w.rms_mv,
            mnf_hz: w.mnf_hz,
            mdf_hz: w.mdf_hz,
            mean_cv_m_s: w.cv.mean_cv_m_s,
            n_cv_accepted: w.cv.n_accepted,
            epoch_mean_rms_mv: w.epoch_mean_rms_mv,
            epoch_mean_mnf_hz: w.epoch_mean_mnf_hz,
        }
    }
}

/// Least-squares slopes over the contraction, per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub mvc_percent: u32,
    pub condition: Condition,
    pub mnf_slope_hz_per_s: f64,
    pub rms_slope_mv_per_s: f64,
    /// `None` when fewer than three epochs passed the CV gate.
    pub cv_slope_m_s_per_s: Option<f64>,
    pub n_epochs: usize,
    pub n_cv_epochs: usize,
}

impl SlopeRow {
    pub fn from_trial(t: &TrialReport) -> Self {
        Self {
            mvc_percent: t.mvc_percent,
            condition: t.condition,
            mnf_slope_hz_per_s: t.trend.mnf.slope,
            rms_slope_mv_per_s: t.trend.rms.slope,
            cv_slope_m_s_per_s: t.trend.cv.map(|f| f.slope),
            n_epochs: t.trend.n_epochs,
            n_cv_epochs: t.trend.cv.map_or(0, |f| f.n_points),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

impl SessionReport {
    /// Flat tables for external plotting, as `(file name, CSV text)`.
    pub fn csv_tables(&self) -> Vec<(String, String)> {
        vec![
            ("level_table.csv".into(), self.level_csv()),
            ("slope_table.csv".into(), self.slope_csv()),
            ("epoch_series.csv".into(), self.epoch_csv()),
            ("psd_by_level.csv".into(), self.psd_by_level_csv()),
            ("psd_snapshots.csv".into(), self.snapshot_csv()),
        ]
    }

    fn level_csv(&self) -> String {
        to_csv(
            &[
                "mvc_percent",
                "condition",
                "rms_mv",
                "mnf_hz",
                "mdf_hz",
                "mean_cv_m_s",
                "n_cv_accepted",
                "epoch_mean_rms_mv",
                "epoch_mean_mnf_hz",
            ],
            self.level_table.iter().map(|r| {
                vec![
                    r.mvc_percent.to_string(),
                    r.condition.to_string(),
                    r.rms_mv.to_string(),
                    r.mnf_hz.to_string(),
                    r.mdf_hz.to_string(),
                    opt(r.mean_cv_m_s),
                    r.n_cv_accepted.to_string(),
                    r.epoch_mean_rms_mv.to_string(),
                    r.epoch_mean_mnf_hz.to_string(),
                ]
            }),
        )
    }

    fn slope_csv(&self) -> String {
        to_csv(
            &[
                "mvc_percent",
                "condition",
                "mnf_slope_hz_per_s",
                "rms_slope_mv_per_s",
                "cv_slope_m_s_per_s",
                "n_epochs",
                "n_cv_epochs",
            ],
            self.slope_table.iter().map(|r| {
                vec![
                    r.mvc_percent.to_string(),
                    r.condition.to_string(),
                    r.mnf_slope_hz_per_s.to_string(),
                    r.rms_slope_mv_per_s.to_string(),
                    opt(r.cv_slope_m_s_per_s),
                    r.n_epochs.to_string(),
                    r.n_cv_epochs.to_string(),
                ]
            }),
        )
    }

    fn epoch_csv(&self) -> String {
        let rows = self.trials.iter().flat_map(|t| {
            let s = &t.epoch_series;
            (0..s.len()).map(move |i| {
                vec![
                    t.label(),
                    i.to_string(),
                    s.times_s[i].to_string(),
                    s.mnf_hz[i].to_string(),
                    s.rms_mv[i].to_string(),
                    s.cv[i].cv_m_s.to_string(),
                    s.cv[i].correlation.to_string(),
                    s.cv[i].accepted.to_string(),
                ]
            })
        });
        to_csv(
            &["trial", "epoch", "time_s", "mnf_hz", "rms_mv", "cv_m_s", "cv_correlation", "cv_accepted"],
            rows,
        )
    }

    /// Normalised whole-signal PSD of every trial on a shared frequency grid.
    fn psd_by_level_csv(&self) -> String {
        let mut header = vec!["freq_hz".to_string()];
        header.extend(self.trials.iter().map(TrialReport::label));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let Some(first) = self.trials.first() else {
            return to_csv(&header, std::iter::empty());
        };
        let freqs = &first.whole_signal.psd.freqs_hz;
        let rows = freqs.iter().enumerate().map(|(k, f)| {
            let mut row = vec![f.to_string()];
            row.extend(
                self.trials
                    .iter()
                    .map(|t| t.whole_signal.psd.power.get(k).map_or_else(String::new, |p| p.to_string())),
            );
            row
        });
        to_csv(&header, rows)
    }

    fn snapshot_csv(&self) -> String {
        let rows = self.trials.iter().flat_map(|t| {
            let s = &t.trend.psd_snapshots;
            s.onset.freqs_hz.iter().enumerate().map(move |(k, f)| {
                vec![
                    t.label(),
                    f.to_string(),
                    s.onset.power[k].to_string(),
                    s.middle.power[k].to_string(),
                    s.end.power[k].to_string(),
                ]
            })
        });
        to_csv(&["trial", "freq_hz", "onset", "middle", "end"], rows)
    }
}
