use super::{GridRecording, TrimMode};
use crate::error::{Error, Result};

/// Drops the non-contracting parts at the start and end of a trial.
///
/// `Fixed` removes `fixed_trim_s` from both ends. `ForceThreshold` keeps the
/// longest contiguous run where force is at least `force_fraction` times the
/// median of the force's upper quartile.
pub fn trim_active_region(rec: &GridRecording) -> Result<GridRecording> {
    let fs = rec.sampling_rate();
    let n = rec.n_samples();
    let policy = rec.meta.trim;
    let (start, end) = match policy.mode {
        TrimMode::Fixed => {
            let cut = (policy.fixed_trim_s * fs).round() as usize;
            if 2 * cut >= n {
                (0, 0)
            } else {
                (cut, n - cut)
            }
        }
        TrimMode::ForceThreshold => {
            let force = rec.force().ok_or(Error::MissingForce)?;
            let threshold = policy.force_fraction * upper_quartile_median(force);
            longest_run_at_least(force, threshold)
        }
    };
    let min_len = fs.round() as usize;
    if end - start < min_len {
        return Err(Error::RegionTooShort {
            seconds: (end - start) as f64 / fs,
        });
    }
    Ok(rec.slice(start, end))
}

fn upper_quartile_median(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let upper = &sorted[(3 * sorted.len()) / 4..];
    let m = upper.len();
    if m % 2 == 1 {
        upper[m / 2]
    } else {
        0.5 * (upper[m / 2 - 1] + upper[m / 2])
    }
}

/// `[start, end)` of the longest run with `x >= threshold`; earliest on ties.
fn longest_run_at_least(x: &[f64], threshold: f64) -> (usize, usize) {
    let mut best = (0, 0);
    let mut run_start = None;
    for (i, &v) in x.iter().chain(std::iter::once(&f64::NEG_INFINITY)).enumerate() {
        match (v >= threshold, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s > best.1 - best.0 {
                    best = (s, i);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{Condition, GridGeometry, TrialMetadata, TrimPolicy};

    fn recording(n: usize, force: Option<Vec<f64>>, trim: TrimPolicy) -> GridRecording {
        let geometry = GridGeometry {
            rows: 4,
            cols: 1,
            missing_pads: vec![],
            ..GridGeometry::default()
        };
        let meta = TrialMetadata {
            subject_id: "t".into(),
            mvc_percent: 40,
            condition: Condition::BeforeFatigue,
            sampling_rate_hz: 2048.0,
            target_force_n: None,
            trim,
        };
        let channels = (0..4).map(|r| Some(vec![r as f64; n])).collect();
        GridRecording::new(geometry, meta, channels, force, 0.0).unwrap()
    }

    #[test]
    fn fixed_trim_removes_both_ends() {
        let rec = recording(12 * 2048, None, TrimPolicy::default());
        let out = trim_active_region(&rec).unwrap();
        assert_eq!(out.n_samples(), 11 * 2048);
        assert!((out.duration_s() - 11.0).abs() < 1e-12);
        assert!((out.start_time_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fixed_trim_on_short_trial_fails() {
        let rec = recording(3 * 1024, None, TrimPolicy::default());
        assert!(matches!(
            trim_active_region(&rec),
            Err(Error::RegionTooShort { .. })
        ));
    }

    #[test]
    fn force_threshold_starts_at_half_force_crossing() {
        let fs = 2048usize;
        let peak = 120.0;
        // 1 s ramp 0 -> peak, then 5 s plateau
        let force: Vec<f64> = (0..6 * fs)
            .map(|i| if i < fs { peak * i as f64 / fs as f64 } else { peak })
            .collect();
        // first index with peak * i / fs >= peak / 2
        let crossing = fs / 2;
        let policy = TrimPolicy {
            mode: TrimMode::ForceThreshold,
            ..TrimPolicy::default()
        };
        let rec = recording(force.len(), Some(force), policy);
        let out = trim_active_region(&rec).unwrap();
        assert_eq!(out.n_samples(), 6 * fs - crossing);
        assert!((out.start_time_s - crossing as f64 / fs as f64).abs() < 1e-12);
        assert!((out.force().unwrap()[0] - peak / 2.0).abs() < 1e-9);

        let again = trim_active_region(&out).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn force_threshold_needs_force() {
        let policy = TrimPolicy {
            mode: TrimMode::ForceThreshold,
            ..TrimPolicy::default()
        };
        let rec = recording(4096, None, policy);
        assert!(matches!(trim_active_region(&rec), Err(Error::MissingForce)));
    }

    #[test]
    fn longest_run_prefers_longer_then_earlier() {
        let x = [1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        assert_eq!(longest_run_at_least(&x, 0.5), (3, 6));
        assert_eq!(longest_run_at_least(&[0.0; 3], 0.5), (0, 0));
    }
}
