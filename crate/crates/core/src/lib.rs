//! Surface-EMG grid analysis for muscle fatigue: ingest, conditioning,
//! innervation-zone aware channel selection, spectral and amplitude
//! indicators, conduction velocity and their time courses.

pub mod cv;
mod dsp;
pub mod error;
pub mod features;
pub mod preprocess;
pub mod pipeline;
pub mod signal;
pub mod synth;
pub mod timecourse;

pub use cv::{average_cv, estimate_cv, estimate_delay_mle, CvConfig, CvEstimate, CvSummary, DelayEstimate};
pub use error::{Error, ErrorClass, Result, Stage};
pub use features::{feature_set, mdf, mnf, psd, rms, FeatureSet, PsdConfig, PsdEstimate};
pub use preprocess::{BandSpec, IzReport, MontageKind, MontageSignal, Side};
pub use signal::{Condition, GridGeometry, GridRecording, TrialMetadata, TrimMode, TrimPolicy};
pub use timecourse::{fit_slope, plan_epochs, EpochPlan, EpochSeries, LineFit, TrendReport};
pub use pipeline::{analyze_session, analyze_trial, AnalysisConfig, SessionReport, TrialInput, TrialReport};
pub use synth::{generate, make_protocol_dataset, SynthSpec};
