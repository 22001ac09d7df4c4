use serde::{Deserialize, Serialize};

use super::montage::{MontageKind, MontageSignal};
use crate::dsp::demean;
use crate::error::{Error, Result};

/// Slowest physiological propagation considered when scanning lags, m/s.
const IZ_SCAN_CV_MIN: f64 = 2.0;

/// Which side of the innervation zone the analysis channels came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Higher SD indices; propagation runs towards increasing index.
    Distal,
    /// Lower SD indices; propagation runs towards decreasing index.
    Proximal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IzReport {
    pub column: usize,
    /// SD channel index of the innervation zone.
    pub iz_index: usize,
    /// Peak normalised cross-correlation of each adjacent SD pair `(i, i + 1)`
    /// over physiological lags; `None` where a pair touches an unusable channel.
    pub polarity_flips: Vec<Option<f64>>,
    /// Per-channel mean of the two neighbouring pair scores.
    pub channel_scores: Vec<Option<f64>>,
}

/// Peak of the energy-normalised cross-correlation over lags `-max_lag..=max_lag`.
fn peak_xcorr(a: &[f64], b: &[f64], max_lag: usize) -> f64 {
    let ea: f64 = a.iter().map(|v| v * v).sum();
    let eb: f64 = b.iter().map(|v| v * v).sum();
    if ea <= 0.0 || eb <= 0.0 {
        return 0.0;
    }
    let norm = (ea * eb).sqrt();
    let n = a.len() as isize;
    let l = max_lag as isize;
    (-l..=l)
        .map(|lag| {
            let lo = 0.max(-lag);
            let hi = n.min(n - lag);
            (lo..hi)
                .map(|i| a[i as usize] * b[(i + lag) as usize])
                .sum::<f64>()
                / norm
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Locates the innervation zone as the SD channel where adjacent-pair
/// propagation correlation collapses.
///
/// Each channel is scored by the mean of its two neighbouring pair scores; a
/// missing neighbour (grid edge or unusable pair) counts as a perfect 1.0 so
/// that edge channels are not favoured. The zone is the lowest-scoring channel.
pub fn detect_innervation_zone(sd: &MontageSignal) -> Result<IzReport> {
    if sd.kind != MontageKind::SingleDifferential {
        return Err(Error::WrongMontageKind {
            expected: "single-differential",
            found: "other",
        });
    }
    let m = sd.n_channels();
    let usable_count = sd.usable.iter().filter(|&&u| u).count();
    if m < 4 || usable_count < 4 {
        return Err(Error::TooFewChannels {
            needed: 4,
            found: usable_count.min(m),
        });
    }
    let max_lag = ((sd.ied_m / IZ_SCAN_CV_MIN * sd.sampling_rate_hz).ceil() as usize).min(sd.n_samples() / 2);
    let centred: Vec<Vec<f64>> = sd.channels.iter().map(|c| demean(c)).collect();
    let polarity_flips: Vec<Option<f64>> = (0..m - 1)
        .map(|i| {
            (sd.usable[i] && sd.usable[i + 1]).then(|| peak_xcorr(&centred[i], &centred[i + 1], max_lag))
        })
        .collect();
    let channel_scores: Vec<Option<f64>> = (0..m)
        .map(|i| {
            if !sd.usable[i] {
                return None;
            }
            let left = i.checked_sub(1).and_then(|p| polarity_flips[p]);
            let right = polarity_flips.get(i).copied().flatten();
            if left.is_none() && right.is_none() {
                return None;
            }
            Some(0.5 * (left.unwrap_or(1.0) + right.unwrap_or(1.0)))
        })
        .collect();
    let iz_index = channel_scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s)))
        .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
            Some((_, b)) if b <= s => best,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i)
        .ok_or(Error::TooFewChannels { needed: 4, found: 0 })?;
    Ok(IzReport {
        column: sd.column,
        iz_index,
        polarity_flips,
        channel_scores,
    })
}

/// First run of `k` consecutive usable channels walking away from the zone,
/// skipping the zone channel and its immediate neighbour.
fn side_run(sd: &MontageSignal, iz: usize, k: usize, side: Side) -> Option<Vec<usize>> {
    let m = sd.n_channels() as isize;
    let step: isize = match side {
        Side::Distal => 1,
        Side::Proximal => -1,
    };
    let mut start = iz as isize + 2 * step;
    loop {
        let end = start + step * (k as isize - 1);
        if start < 0 || start >= m || end < 0 || end >= m {
            return None;
        }
        let run: Vec<usize> = (0..k as isize).map(|j| (start + step * j) as usize).collect();
        match run.iter().rposition(|&i| !sd.usable[i]) {
            None => return Some(run),
            Some(bad) => start += step * (bad as isize + 1),
        }
    }
}

/// Picks `k` consecutive SD channels on the better-propagating side of the
/// innervation zone, ordered along the propagation direction.
pub fn select_channels(sd: &MontageSignal, iz: &IzReport, k: usize) -> Result<Vec<usize>> {
    if k < 3 {
        return Err(Error::InvalidConfig(format!("need at least 3 selected channels, got {k}")));
    }
    let score = |run: &[usize]| -> f64 {
        let vals: Vec<f64> = run
            .windows(2)
            .filter_map(|w| iz.polarity_flips.get(w[0].min(w[1])).copied().flatten())
            .collect();
        if vals.is_empty() {
            f64::NEG_INFINITY
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let distal = side_run(sd, iz.iz_index, k, Side::Distal);
    let proximal = side_run(sd, iz.iz_index, k, Side::Proximal);
    match (distal, proximal) {
        (Some(d), Some(p)) => Ok(if score(&p) > score(&d) { p } else { d }),
        (Some(run), None) | (None, Some(run)) => Ok(run),
        (None, None) => {
            let m = sd.n_channels();
            let available = (m.saturating_sub(iz.iz_index + 2)).max(iz.iz_index.saturating_sub(1));
            Err(Error::NotEnoughCleanChannels { needed: k, available })
        }
    }
}

/// Side of the zone a selection came from.
pub fn selection_side(selection: &[usize]) -> Side {
    match selection {
        [a, b, ..] if b < a => Side::Proximal,
        _ => Side::Distal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn montage(channels: Vec<Vec<f64>>) -> MontageSignal {
        let m = channels.len();
        MontageSignal {
            kind: MontageKind::SingleDifferential,
            column: 0,
            channels,
            positions_m: (0..m).map(|i| (i as f64 + 0.5) * 0.008).collect(),
            usable: vec![true; m],
            sampling_rate_hz: 2048.0,
            ied_m: 0.008,
        }
    }

    #[test]
    fn peak_xcorr_finds_shifted_copy() {
        let a: Vec<f64> = (0..256).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let b: Vec<f64> = (0..256).map(|i| if i >= 3 { a[i - 3] } else { 0.0 }).collect();
        assert!(peak_xcorr(&a, &b, 5) > 0.9);
        assert!(peak_xcorr(&a, &b, 1) < 0.5);
    }

    #[test]
    fn side_run_respects_edges_and_unusable() {
        let mut sd = montage(vec![vec![0.0; 8]; 12]);
        assert_eq!(side_run(&sd, 6, 3, Side::Distal), Some(vec![8, 9, 10]));
        assert_eq!(side_run(&sd, 6, 3, Side::Proximal), Some(vec![4, 3, 2]));
        assert_eq!(side_run(&sd, 1, 3, Side::Proximal), None);
        sd.usable[9] = false;
        assert_eq!(side_run(&sd, 6, 3, Side::Distal), None);
        assert_eq!(side_run(&sd, 1, 3, Side::Distal), Some(vec![3, 4, 5]));
        assert_eq!(side_run(&sd, 4, 3, Side::Distal), Some(vec![6, 7, 8]));
        assert_eq!(side_run(&sd, 5, 3, Side::Distal), None);
    }

    #[test]
    fn selection_errors() {
        let sd = montage(vec![vec![0.0; 8]; 12]);
        let iz = IzReport {
            column: 0,
            iz_index: 6,
            polarity_flips: vec![Some(0.9); 11],
            channel_scores: vec![Some(0.9); 12],
        };
        assert!(matches!(select_channels(&sd, &iz, 12), Err(Error::NotEnoughCleanChannels { .. })));
        assert!(matches!(select_channels(&sd, &iz, 2), Err(Error::InvalidConfig(_))));
        assert_eq!(select_channels(&sd, &iz, 3).unwrap(), vec![8, 9, 10]);
    }
}
