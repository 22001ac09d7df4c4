use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::GridRecording;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MontageKind {
    Monopolar,
    SingleDifferential,
    DoubleDifferential,
}

impl MontageKind {
    fn name(self) -> &'static str {
        match self {
            MontageKind::Monopolar => "monopolar",
            MontageKind::SingleDifferential => "single-differential",
            MontageKind::DoubleDifferential => "double-differential",
        }
    }
}

/// Derived channels of one grid column, ordered along the fiber axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MontageSignal {
    pub kind: MontageKind,
    pub column: usize,
    pub channels: Vec<Vec<f64>>,
    /// Center of each derived channel along the fiber axis, meters.
    pub positions_m: Vec<f64>,
    /// `false` where the channel touches a missing pad; such channels hold zeros.
    pub usable: Vec<bool>,
    pub sampling_rate_hz: f64,
    pub ied_m: f64,
}

impl MontageSignal {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate_hz
    }

    /// Copy restricted to samples `[start, end)`.
    pub fn window(&self, start: usize, end: usize) -> MontageSignal {
        MontageSignal {
            channels: self.channels.iter().map(|c| c[start..end].to_vec()).collect(),
            positions_m: self.positions_m.clone(),
            usable: self.usable.clone(),
            ..*self
        }
    }

    /// Same montage with the electrode order along the fiber axis reversed.
    pub fn reversed(&self) -> MontageSignal {
        let sign = match self.kind {
            MontageKind::SingleDifferential => -1.0,
            _ => 1.0,
        };
        let span = self.positions_m.first().copied().unwrap_or(0.0)
            + self.positions_m.last().copied().unwrap_or(0.0);
        MontageSignal {
            channels: self
                .channels
                .iter()
                .rev()
                .map(|c| c.iter().map(|v| sign * v).collect())
                .collect(),
            positions_m: self.positions_m.iter().rev().map(|p| span - p).collect(),
            usable: self.usable.iter().rev().copied().collect(),
            ..*self
        }
    }
}

fn check_column(rec: &GridRecording, column: usize) -> Result<()> {
    if column >= rec.geometry.cols {
        return Err(Error::ColumnOutOfRange {
            column,
            cols: rec.geometry.cols,
        });
    }
    Ok(())
}

pub fn monopolar(rec: &GridRecording, column: usize) -> Result<MontageSignal> {
    check_column(rec, column)?;
    let g = &rec.geometry;
    let n = rec.n_samples();
    let mut channels = Vec::with_capacity(g.rows);
    let mut usable = Vec::with_capacity(g.rows);
    for row in 0..g.rows {
        match rec.channel(row, column) {
            Some(x) => {
                channels.push(x.to_vec());
                usable.push(true);
            }
            None => {
                channels.push(vec![0.0; n]);
                usable.push(false);
            }
        }
    }
    Ok(MontageSignal {
        kind: MontageKind::Monopolar,
        column,
        channels,
        positions_m: (0..g.rows).map(|r| r as f64 * g.ied_m).collect(),
        usable,
        sampling_rate_hz: rec.sampling_rate(),
        ied_m: g.ied_m,
    })
}

/// `SD[i] = mono[i + 1] - mono[i]` along the fiber axis.
pub fn single_differential(rec: &GridRecording, column: usize) -> Result<MontageSignal> {
    check_column(rec, column)?;
    let g = &rec.geometry;
    let n = rec.n_samples();
    let mut channels = Vec::with_capacity(g.rows - 1);
    let mut usable = Vec::with_capacity(g.rows - 1);
    for row in 0..g.rows - 1 {
        match (rec.channel(row, column), rec.channel(row + 1, column)) {
            (Some(a), Some(b)) => {
                channels.push(b.iter().zip(a).map(|(b, a)| b - a).collect());
                usable.push(true);
            }
            _ => {
                channels.push(vec![0.0; n]);
                usable.push(false);
            }
        }
    }
    Ok(MontageSignal {
        kind: MontageKind::SingleDifferential,
        column,
        channels,
        positions_m: (0..g.rows - 1).map(|i| (i as f64 + 0.5) * g.ied_m).collect(),
        usable,
        sampling_rate_hz: rec.sampling_rate(),
        ied_m: g.ied_m,
    })
}

/// `DD[i] = SD[i + 1] - SD[i]`.
pub fn double_differential(sd: &MontageSignal) -> Result<MontageSignal> {
    if sd.kind != MontageKind::SingleDifferential {
        return Err(Error::WrongMontageKind {
            expected: MontageKind::SingleDifferential.name(),
            found: sd.kind.name(),
        });
    }
    let m = sd.n_channels();
    if m < 2 {
        return Err(Error::TooFewChannels { needed: 2, found: m });
    }
    let channels = sd
        .channels
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
        .collect();
    Ok(MontageSignal {
        kind: MontageKind::DoubleDifferential,
        column: sd.column,
        channels,
        positions_m: sd.positions_m.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        usable: sd.usable.windows(2).map(|w| w[0] && w[1]).collect(),
        sampling_rate_hz: sd.sampling_rate_hz,
        ied_m: sd.ied_m,
    })
}

/// Column whose usable SD channels have the highest mean RMS.
pub fn choose_column(rec: &GridRecording) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for col in 0..rec.geometry.cols {
        let sd = single_differential(rec, col)?;
        let rms: Vec<f64> = sd
            .channels
            .iter()
            .zip(&sd.usable)
            .filter(|(_, &u)| u)
            .map(|(c, _)| (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt())
            .collect();
        if rms.is_empty() {
            continue;
        }
        let mean = rms.iter().sum::<f64>() / rms.len() as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((col, mean));
        }
    }
    best.map(|(c, _)| c).ok_or(Error::TooFewChannels { needed: 1, found: 0 })
}
