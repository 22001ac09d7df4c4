//! End-to-end analysis of single trials and of multi-level sessions.
//!
//! ingest -> trim -> band-pass -> montage -> innervation zone / selection ->
//! whole-signal features -> epoch series with CV -> trends.

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cv::{average_cv, dd_channels_for, CvSummary};
use crate::dsp::{fractional_shift, pearson};
use crate::error::{Error, Result, Stage, StageExt};
use crate::features::{feature_set, PsdEstimate};
use crate::preprocess::{
    bandpass, choose_column, detect_innervation_zone, double_differential, select_channels, selection_side,
    single_differential, IzReport, Side,
};
use crate::signal::{parse_metadata, parse_trial_csv, trim_active_region, Condition, GridRecording};
use crate::timecourse::{epoch_series, psd_snapshots, trend_report, EpochSeries, TrendReport};

pub use config::{AnalysisConfig, CONFIG_KEYS};
pub use report::{LevelRow, SlopeRow};

pub const TOOL_NAME: &str = "myograph";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Paths of one trial's signal CSV and metadata sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialInput {
    pub signal: PathBuf,
    pub meta: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub signal: String,
    pub signal_sha256: String,
    pub meta: String,
    pub meta_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// Effective configuration after merging defaults, file and flags.
    pub config: AnalysisConfig,
    pub inputs: Vec<InputRecord>,
}

impl Provenance {
    fn new(config: &AnalysisConfig, inputs: Vec<InputRecord>) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config: config.clone(),
            inputs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Start of the analysed region in the original recording.
    pub start_s: f64,
    pub duration_s: f64,
}

/// Choices made on the way to the indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    pub column: usize,
    pub column_automatic: bool,
    pub innervation_zone: IzReport,
    /// Index detected from the data, kept even when overridden.
    pub detected_iz_index: usize,
    pub iz_overridden: bool,
    pub side: Side,
    pub sd_channels: Vec<usize>,
    pub dd_channels: Vec<usize>,
    /// Epoch indices whose CV failed the correlation gate.
    pub rejected_cv_epochs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFeatures {
    pub sd_channel: usize,
    pub rms_mv: f64,
    pub mnf_hz: f64,
    pub mdf_hz: f64,
}

/// Indicators over the whole analysed region, averaged across the selected
/// SD channels, next to the epoch means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WholeSignal {
    pub rms_mv: f64,
    pub mnf_hz: f64,
    pub mdf_hz: f64,
    /// Mean of the channels' normalised PSDs.
    pub psd: PsdEstimate,
    pub per_channel: Vec<ChannelFeatures>,
    /// Mean over gated epoch estimates.
    pub cv: CvSummary,
    pub epoch_mean_rms_mv: f64,
    pub epoch_mean_mnf_hz: f64,
    /// Pearson correlation of adjacent selected SD channels after removing
    /// the mean accepted delay; informational, not gated.
    pub sd_pair_correlations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub input: InputRecord,
    pub subject_id: String,
    pub mvc_percent: u32,
    pub condition: Condition,
    pub region: Region,
    pub decisions: Decisions,
    pub whole_signal: WholeSignal,
    pub epoch_series: EpochSeries,
    pub trend: TrendReport,
}

impl TrialReport {
    /// Short label such as `mvc10_before_fatigue`.
    pub fn label(&self) -> String {
        format!("mvc{:02}_{}", self.mvc_percent, self.condition)
    }
}

/// Output of single-trial analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub provenance: Provenance,
    pub trial: TrialReport,
}

impl AnalyzeReport {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub provenance: Provenance,
    /// Ordered by MVC level, then condition.
    pub trials: Vec<TrialReport>,
    pub level_table: Vec<LevelRow>,
    pub slope_table: Vec<SlopeRow>,
}

impl SessionReport {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Analyses a trial already held in memory.
pub fn analyze_recording(rec: &GridRecording, config: &AnalysisConfig, input: InputRecord) -> Result<TrialReport> {
    config.validate()?;
    let rate = rec.sampling_rate();
    let trimmed = trim_active_region(rec).stage(Stage::Trim)?;
    let filtered = bandpass(&trimmed, &config.band).stage(Stage::Filter)?;

    let (column, column_automatic) = match config.column {
        Some(c) if c >= filtered.geometry.cols => {
            return Err(Error::ColumnOutOfRange {
                column: c,
                cols: filtered.geometry.cols,
            })
            .stage(Stage::Montage)
        }
        Some(c) => (c, false),
        None => (choose_column(&filtered).stage(Stage::Montage)?, true),
    };
    let sd = single_differential(&filtered, column).stage(Stage::Montage)?;
    let dd = double_differential(&sd).stage(Stage::Montage)?;

    let mut iz = detect_innervation_zone(&sd).stage(Stage::InnervationZone)?;
    let detected_iz_index = iz.iz_index;
    if let Some(forced) = config.iz_index {
        if forced >= sd.n_channels() {
            return Err(Error::InvalidConfig(format!(
                "iz-index {forced} out of range for {} SD channels",
                sd.n_channels()
            )))
            .stage(Stage::InnervationZone);
        }
        iz.iz_index = forced;
    }
    let sd_channels = select_channels(&sd, &iz, config.select_k).stage(Stage::Selection)?;
    let dd_channels = dd_channels_for(&sd_channels);

    let per_channel_sets = sd_channels
        .par_iter()
        .map(|&c| feature_set(&sd.channels[c], rate, &config.band, &config.psd, 0.0))
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Features)?;
    let psd = PsdEstimate::average(&per_channel_sets.iter().map(|f| f.psd.clone()).collect::<Vec<_>>())
        .stage(Stage::Features)?;

    let cv_cfg = config.cv_config(sd.ied_m);
    let series = epoch_series(&sd, &dd, &sd_channels, &config.epochs, &cv_cfg, &config.band, &config.psd)
        .stage(Stage::Timecourse)?;
    let cv = average_cv(&series.cv);
    if cv.n_accepted == 0 {
        return Err(Error::NoAcceptedCv { epochs: series.len() }).stage(Stage::ConductionVelocity);
    }
    let snapshots =
        psd_snapshots(&sd, &sd_channels, &config.epochs, &config.band, &config.psd).stage(Stage::Timecourse)?;
    let trend = trend_report(&series, snapshots).stage(Stage::Timecourse)?;

    let accepted_theta: Vec<f64> = series.cv.iter().filter(|e| e.accepted).map(|e| e.theta_s).collect();
    let theta_samples = accepted_theta.iter().sum::<f64>() / accepted_theta.len() as f64 * rate;
    let sd_pair_correlations = sd_channels
        .windows(2)
        .map(|w| pearson(&sd.channels[w[0]], &fractional_shift(&sd.channels[w[1]], -theta_samples)))
        .collect();

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let per_channel: Vec<ChannelFeatures> = sd_channels
        .iter()
        .zip(&per_channel_sets)
        .map(|(&c, f)| ChannelFeatures {
            sd_channel: c,
            rms_mv: f.rms_mv,
            mnf_hz: f.mnf_hz,
            mdf_hz: f.mdf_hz,
        })
        .collect();
    let whole_signal = WholeSignal {
        rms_mv: mean(&per_channel.iter().map(|c| c.rms_mv).collect::<Vec<_>>()),
        mnf_hz: mean(&per_channel.iter().map(|c| c.mnf_hz).collect::<Vec<_>>()),
        mdf_hz: mean(&per_channel.iter().map(|c| c.mdf_hz).collect::<Vec<_>>()),
        psd,
        per_channel,
        cv,
        epoch_mean_rms_mv: mean(&series.rms_mv),
        epoch_mean_mnf_hz: mean(&series.mnf_hz),
        sd_pair_correlations,
    };

    let rejected_cv_epochs = series
        .cv
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.accepted)
        .map(|(i, _)| i)
        .collect();
    Ok(TrialReport {
        input,
        subject_id: rec.meta.subject_id.clone(),
        mvc_percent: rec.meta.mvc_percent,
        condition: rec.meta.condition,
        region: Region {
            start_s: trimmed.start_time_s,
            duration_s: trimmed.duration_s(),
        },
        decisions: Decisions {
            column,
            column_automatic,
            innervation_zone: iz,
            detected_iz_index,
            iz_overridden: config.iz_index.is_some(),
            side: selection_side(&sd_channels),
            sd_channels,
            dd_channels,
            rejected_cv_epochs,
        },
        whole_signal,
        epoch_series: series,
        trend,
    })
}

fn load_input(input: &TrialInput) -> Result<(GridRecording, InputRecord)> {
    let meta_bytes = read(&input.meta)?;
    let signal_bytes = read(&input.signal)?;
    let meta_text = std::str::from_utf8(&meta_bytes)
        .map_err(|_| Error::InvalidMetadata(format!("{} is not UTF-8", input.meta.display())))?;
    let (geometry, meta) = parse_metadata(meta_text)?;
    let rec = parse_trial_csv(signal_bytes.as_slice(), geometry, meta)?;
    let record = InputRecord {
        signal: input.signal.display().to_string(),
        signal_sha256: sha256_hex(&signal_bytes),
        meta: input.meta.display().to_string(),
        meta_sha256: sha256_hex(&meta_bytes),
    };
    Ok((rec, record))
}

fn analyze_input(input: &TrialInput, config: &AnalysisConfig) -> Result<TrialReport> {
    let (rec, record) = load_input(input).stage(Stage::Ingest)?;
    analyze_recording(&rec, config, record)
}

/// Full analysis of one trial from its files.
pub fn analyze_trial(signal_path: &Path, meta_path: &Path, config: &AnalysisConfig) -> Result<AnalyzeReport> {
    let input = TrialInput {
        signal: signal_path.to_path_buf(),
        meta: meta_path.to_path_buf(),
    };
    let trial = analyze_input(&input, config)?;
    Ok(AnalyzeReport {
        provenance: Provenance::new(config, vec![trial.input.clone()]),
        trial,
    })
}

/// Analyses every trial (in parallel) and builds the cross-level tables.
pub fn analyze_session(trials: &[TrialInput], config: &AnalysisConfig) -> Result<SessionReport> {
    config.validate().stage(Stage::Session)?;
    if trials.is_empty() {
        return Err(Error::InvalidConfig("session lists no trials".into())).stage(Stage::Session);
    }
    // cheap duplicate check before the expensive part
    let mut levels = Vec::with_capacity(trials.len());
    for t in trials {
        let text = fs::read_to_string(&t.meta).map_err(|e| Error::io(&t.meta, e)).stage(Stage::Ingest)?;
        let (_, meta) = parse_metadata(&text).stage(Stage::Ingest)?;
        let key = (meta.mvc_percent, meta.condition);
        if levels.contains(&key) {
            return Err(Error::DuplicateTrialLevel {
                mvc_percent: key.0,
                condition: key.1,
            })
            .stage(Stage::Session);
        }
        levels.push(key);
    }

    let mut reports = trials
        .par_iter()
        .map(|t| analyze_input(t, config))
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by_key(|r| (r.mvc_percent, r.condition));
    Ok(SessionReport {
        provenance: Provenance::new(config, reports.iter().map(|r| r.input.clone()).collect()),
        level_table: reports.iter().map(LevelRow::from_trial).collect(),
        slope_table: reports.iter().map(SlopeRow::from_trial).collect(),
        trials: reports,
    })
}

/// Session manifest: trial file pairs, relative paths resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub trials: Vec<TrialInput>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut m: Manifest =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("session manifest: {e}")))?;
        for t in &mut m.trials {
            t.signal = base.join(&t.signal);
            t.meta = base.join(&t.meta);
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }
}
