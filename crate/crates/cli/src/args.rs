use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use myograph::{AnalysisConfig, Result};

#[derive(Debug, Parser)]
#[command(name = "myograph", version, about = "Surface EMG fatigue analysis on high-density grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyse one trial and write its JSON report.
    Analyze {
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        #[command(flatten)]
        options: AnalysisOptions,
        /// Report path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Analyse every trial of a manifest and write the session report and tables.
    Session {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        options: AnalysisOptions,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic trials.
    Synth {
        /// Synthesis spec (JSON).
        #[arg(long, required_unless_present = "protocol", conflicts_with = "protocol")]
        spec: Option<PathBuf>,
        /// Write the seven-trial demo protocol and its session manifest.
        #[arg(long)]
        protocol: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Analysis options shared by `analyze` and `session`. Flags override the
/// config file, which overrides the defaults.
#[derive(Debug, Args)]
pub struct AnalysisOptions {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Band-pass corners, `low:high` in Hz.
    #[arg(long, value_name = "LOW:HIGH")]
    pub band: Option<String>,
    /// Butterworth order of each corner.
    #[arg(long)]
    pub filter_order: Option<String>,
    /// Innervation-zone SD index, or `auto`.
    #[arg(long)]
    pub iz_index: Option<String>,
    /// Number of SD channels used for features and CV.
    #[arg(long)]
    pub select_k: Option<String>,
    /// Grid column, or `auto`.
    #[arg(long)]
    pub column: Option<String>,
    /// Welch segment length in samples.
    #[arg(long)]
    pub psd_seg: Option<String>,
    /// Welch segment overlap fraction.
    #[arg(long)]
    pub psd_overlap: Option<String>,
    /// Minimum correlation for accepting a CV epoch.
    #[arg(long)]
    pub corr_threshold: Option<String>,
    /// Physiological CV bracket, `min:max` in m/s.
    #[arg(long, value_name = "MIN:MAX")]
    pub cv_range: Option<String>,
    /// Epoch length, s.
    #[arg(long)]
    pub epoch_len: Option<String>,
    /// Spacing between epoch starts, s.
    #[arg(long)]
    pub epoch_gap: Option<String>,
    /// Onset/middle/end PSD window length, s.
    #[arg(long)]
    pub psd_window: Option<String>,
}

impl AnalysisOptions {
    fn flags(&self) -> [(&'static str, &Option<String>); 12] {
        [
            ("band", &self.band),
            ("filter-order", &self.filter_order),
            ("iz-index", &self.iz_index),
            ("select-k", &self.select_k),
            ("column", &self.column),
            ("psd-seg", &self.psd_seg),
            ("psd-overlap", &self.psd_overlap),
            ("corr-threshold", &self.corr_threshold),
            ("cv-range", &self.cv_range),
            ("epoch-len", &self.epoch_len),
            ("epoch-gap", &self.epoch_gap),
            ("psd-window", &self.psd_window),
        ]
    }

    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self) -> Result<AnalysisConfig> {
        let mut config = AnalysisConfig::default();
        if let Some(path) = &self.config {
            let text = crate::read_text(path)?;
            config.apply_file(&text)?;
        }
        for (key, value) in self.flags() {
            if let Some(v) = value {
                config.apply(key, v)?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}
