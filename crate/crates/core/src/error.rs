use std::fmt;
use std::path::PathBuf;

use crate::signal::Condition;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage an error surfaced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Trim,
    Filter,
    Montage,
    InnervationZone,
    Selection,
    Features,
    ConductionVelocity,
    Timecourse,
    Session,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Trim => "trim",
            Stage::Filter => "filter",
            Stage::Montage => "montage",
            Stage::InnervationZone => "innervation-zone",
            Stage::Selection => "selection",
            Stage::Features => "features",
            Stage::ConductionVelocity => "conduction-velocity",
            Stage::Timecourse => "timecourse",
            Stage::Session => "session",
        };
        f.write_str(name)
    }
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Analysis,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("non-finite sample at data line {line}, column `{column}`")]
    NonFiniteSample { line: usize, column: String },
    #[error("metadata mismatch: {0}")]
    MetadataMismatch(String),
    #[error("sampling rate {rate} Hz is below twice the band upper edge ({band_high} Hz)")]
    UnsupportedRate { rate: f64, band_high: f64 },
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
    #[error("active region of {seconds:.3} s is shorter than the 1 s minimum")]
    RegionTooShort { seconds: f64 },
    #[error("force-threshold trimming requested but the recording has no force channel")]
    MissingForce,
    #[error("band {low}-{high} Hz (order {order}) is invalid at {rate} Hz")]
    BandInvalid {
        low: f64,
        high: f64,
        order: usize,
        rate: f64,
    },
    #[error("column {column} out of range for a grid with {cols} columns")]
    ColumnOutOfRange { column: usize, cols: usize },
    #[error("expected a {expected} montage, got {found}")]
    WrongMontageKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("need at least {needed} channels, found {found}")]
    TooFewChannels { needed: usize, found: usize },
    #[error("need {needed} clean channels on one side of the innervation zone, at most {available} available")]
    NotEnoughCleanChannels { needed: usize, available: usize },
    #[error("empty signal")]
    EmptySignal,
    #[error("signal of {found} samples is shorter than the required {needed}")]
    SignalTooShort { needed: usize, found: usize },
    #[error("spectrum has zero power in the analysis band")]
    ZeroPower,
    #[error("window of {found} samples is shorter than the required {needed}")]
    WindowTooShort { needed: usize, found: usize },
    #[error("delay search did not converge after {iterations} iterations")]
    SearchDidNotConverge { iterations: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("duration {found:.3} s is shorter than the required {needed:.3} s")]
    DurationTooShort { needed: f64, found: f64 },
    #[error("need at least {needed} finite points for a slope, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("no conduction-velocity estimate passed the correlation gate in {epochs} epochs")]
    NoAcceptedCv { epochs: usize },
    #[error("invalid synthesis spec: {0}")]
    SpecInvalid(String),
    #[error("more than one trial at {mvc_percent}% MVC, {condition}")]
    DuplicateTrialLevel {
        mvc_percent: u32,
        condition: Condition,
    },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Outermost stage annotation, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::MalformedFile(_)
            | Error::NonFiniteSample { .. }
            | Error::MetadataMismatch(_)
            | Error::UnsupportedRate { .. }
            | Error::InvalidMetadata(_)
            | Error::InvalidConfig(_)
            | Error::SpecInvalid(_)
            | Error::DuplicateTrialLevel { .. }
            | Error::MissingForce
            | Error::BandInvalid { .. }
            | Error::ColumnOutOfRange { .. }
            | Error::Io { .. } => ErrorClass::Input,
            Error::Invariant(_) | Error::WrongMontageKind { .. } => ErrorClass::Internal,
            _ => ErrorClass::Analysis,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e {
            // keep the innermost stage name
            Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        })
    }
}
