//! Synthetic grid recordings with known conduction velocity, spectrum and
//! amplitude, used as ground truth for the estimators and for the bundled
//! protocol dataset.
//!
//! The source is Gaussian noise shaped by a Gaussian power spectrum and built
//! block by block (sine-windowed, 50% overlap, so the overlap-add keeps unit
//! variance). Every block is propagated to each row with a frequency-domain
//! fractional delay `|x_row - z| / cv(t)`, where `z` is the centre of the
//! innervation-zone SD channel. Because the wave leaves `z` in both
//! directions, single-differential channels flip sign across the zone and the
//! zone channel itself carries no propagating signal.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cv::CvConfig;
use crate::dsp::{delay_phase, fft_real, ifft_real};
use crate::error::{Error, Result};
use crate::signal::{save_trial, Condition, GridGeometry, GridRecording, TrialMetadata, TrimPolicy, MAX_RATE_HZ};

/// Quantum applied to samples written to disk, mV.
/// Longest trial the generator accepts, s.
pub const MAX_DURATION_S: f64 = 3600.0;

pub const FILE_QUANTUM_MV: f64 = 1e-4;

const BLOCK_LEN: usize = 512;
const HOP: usize = BLOCK_LEN / 2;

/// A quantity that is either constant or drifts linearly over the trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Linear { start: f64, end: f64 },
}

impl Profile {
    /// Value at time `t` of a trial lasting `duration` seconds.
    pub fn at(&self, t: f64, duration: f64) -> f64 {
        match *self {
            Profile::Constant(v) => v,
            Profile::Linear { start, end } => {
                let u = (t / duration).clamp(0.0, 1.0);
                start + (end - start) * u
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Profile::Constant(v) => v,
            Profile::Linear { start, end } => 0.5 * (start + end),
        }
    }

    fn extremes(&self) -> (f64, f64) {
        match *self {
            Profile::Constant(v) => (v, v),
            Profile::Linear { start, end } => (start.min(end), start.max(end)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralShape {
    /// Centre of the Gaussian power spectrum at the start of the trial.
    pub center_hz: f64,
    /// Standard deviation of the Gaussian power spectrum.
    pub width_hz: f64,
    /// Factor by which centre and width have been scaled at the end of the
    /// trial, reached linearly; 1 means stationary.
    #[serde(default = "one")]
    pub compression: f64,
}

fn one() -> f64 {
    1.0
}

impl SpectralShape {
    fn scale_at(&self, t: f64, duration: f64) -> f64 {
        1.0 + (self.compression - 1.0) * (t / duration).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Conduction velocity, m/s.
    pub cv_profile: Profile,
    pub spectral_shape: SpectralShape,
    /// RMS of the propagating source on the active column, mV.
    pub amplitude_profile: Profile,
    /// SD channel index of the innervation zone.
    pub iz_sd_index: usize,
    /// Signal-to-noise ratio per monopolar channel against the mean source
    /// power; `None` for a noiseless recording.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub duration_s: f64,
    pub seed: u64,
    /// Column carrying the full-strength source; defaults to the middle one.
    #[serde(default)]
    pub active_column: Option<usize>,
    /// Per-column attenuation away from the active column.
    #[serde(default = "half")]
    pub column_attenuation: f64,
    /// Linear on/off ramp applied to the EMG envelope and force, seconds.
    #[serde(default)]
    pub ramp_s: f64,
    /// Plateau force, N; adds a force channel when set.
    #[serde(default)]
    pub force_n: Option<f64>,
}

fn half() -> f64 {
    0.5
}

impl SynthSpec {
    /// A stationary trial: constant CV, spectrum and amplitude.
    pub fn stationary(cv: f64, duration_s: f64, seed: u64) -> Self {
        Self {
            cv_profile: Profile::Constant(cv),
            spectral_shape: SpectralShape {
                center_hz: 120.0,
                width_hz: 40.0,
                compression: 1.0,
            },
            amplitude_profile: Profile::Constant(0.5),
            iz_sd_index: 5,
            snr_db: Some(20.0),
            duration_s,
            seed,
            active_column: None,
            column_attenuation: 0.5,
            ramp_s: 0.0,
            force_n: None,
        }
    }

    pub fn validate(&self, geometry: &GridGeometry, rate: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::SpecInvalid(msg));
        if !(self.duration_s > 0.0 && self.duration_s <= MAX_DURATION_S) {
            return bad(format!(
                "duration must lie in (0, {MAX_DURATION_S}] s, got {}",
                self.duration_s
            ));
        }
        if !(rate > 0.0 && rate <= MAX_RATE_HZ) {
            return bad(format!("sampling rate must lie in (0, {MAX_RATE_HZ}] Hz, got {rate}"));
        }
        if ((self.duration_s * rate).round() as usize) < 2 {
            return bad("duration shorter than two samples".into());
        }
        let bracket = CvConfig::default();
        let (lo, hi) = self.cv_profile.extremes();
        if !(lo >= bracket.cv_min && hi <= bracket.cv_max) {
            return bad(format!(
                "cv profile must stay within [{}, {}] m/s, got [{lo}, {hi}]",
                bracket.cv_min, bracket.cv_max
            ));
        }
        let s = &self.spectral_shape;
        if !(s.width_hz > 0.0 && s.width_hz.is_finite()) {
            return bad(format!("spectral width must be positive, got {}", s.width_hz));
        }
        if !(s.center_hz > 0.0 && s.center_hz < rate / 2.0 && s.compression > 0.0 && s.compression.is_finite()) {
            return bad("spectral centre must lie in (0, rate/2) and compression must be positive".into());
        }
        let (alo, ahi) = self.amplitude_profile.extremes();
        if !(alo >= 0.0 && ahi.is_finite()) {
            return bad("amplitude profile must be non-negative".into());
        }
        if geometry.rows < 2 || self.iz_sd_index + 1 >= geometry.rows {
            return bad(format!(
                "innervation zone SD index {} needs at least {} rows",
                self.iz_sd_index,
                self.iz_sd_index + 2
            ));
        }
        if self.active_column.is_some_and(|c| c >= geometry.cols) {
            return bad("active column outside the grid".into());
        }
        if !(0.0..=1.0).contains(&self.column_attenuation) {
            return bad("column attenuation must lie in [0, 1]".into());
        }
        if !(self.ramp_s >= 0.0 && 2.0 * self.ramp_s <= self.duration_s) {
            return bad("ramp must be non-negative and fit twice in the duration".into());
        }
        if self.snr_db.is_some_and(|v| !v.is_finite()) {
            return bad("SNR must be finite".into());
        }
        if self.force_n.is_some_and(|f| !(f >= 0.0 && f.is_finite())) {
            return bad("force must be non-negative".into());
        }
        Ok(())
    }

    fn envelope(&self, t: f64) -> f64 {
        if self.ramp_s <= 0.0 {
            return 1.0;
        }
        (t / self.ramp_s).min((self.duration_s - t) / self.ramp_s).clamp(0.0, 1.0)
    }
}

/// Propagating source for each row of the grid, unit variance before scaling.
fn row_sources(spec: &SynthSpec, geometry: &GridGeometry, rate: f64, n: usize) -> Vec<Vec<f64>> {
    let ied = geometry.ied_m;
    let z = (spec.iz_sd_index as f64 + 0.5) * ied;
    let distances: Vec<f64> = (0..geometry.rows).map(|r| (r as f64 * ied - z).abs()).collect();
    let max_delay = distances.iter().fold(0.0f64, |m, &d| m.max(d)) / spec.cv_profile.extremes().0 * rate;
    let frame = (BLOCK_LEN + 2 * (max_delay.ceil() as usize + 128)).next_power_of_two();
    let pre = (frame - BLOCK_LEN) / 2;

    let window: Vec<f64> = (0..BLOCK_LEN)
        .map(|i| (PI * (i as f64 + 0.5) / BLOCK_LEN as f64).sin())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);

    let mut out = vec![vec![0.0; n]; geometry.rows];
    let n_blocks = n.div_ceil(HOP) + 1;
    let mut buf = vec![0.0; frame];
    for b in 0..n_blocks {
        let start = b as isize * HOP as isize - HOP as isize;
        let t_mid = (start as f64 + BLOCK_LEN as f64 / 2.0) / rate;
        let scale = spec.spectral_shape.scale_at(t_mid, spec.duration_s);
        let center = spec.spectral_shape.center_hz * scale;
        let width = spec.spectral_shape.width_hz * scale;
        let cv = spec.cv_profile.at(t_mid, spec.duration_s);

        buf.iter_mut().for_each(|v| *v = 0.0);
        for (i, w) in window.iter().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            buf[pre + i] = w * e;
        }
        let mut spectrum = fft_real(&buf);
        // real zero-phase gain with unit mean power over the whole frame
        let gain: Vec<f64> = (0..frame)
            .map(|k| {
                let f = k.min(frame - k) as f64 * rate / frame as f64;
                (-0.5 * ((f - center) / width).powi(2)).exp()
            })
            .collect();
        let mean_power = gain.iter().sum::<f64>() / frame as f64;
        let norm = if mean_power > 0.0 { 1.0 / mean_power.sqrt() } else { 0.0 };
        for (c, g) in spectrum.iter_mut().zip(&gain) {
            *c *= g.sqrt() * norm;
        }

        for (row, &dist) in out.iter_mut().zip(&distances) {
            let delay = dist / cv * rate;
            let shifted: Vec<Complex64> = spectrum
                .iter()
                .enumerate()
                .map(|(k, c)| c * delay_phase(k, frame, delay))
                .collect();
            let y = ifft_real(&shifted);
            let offset = start - pre as isize;
            for (i, v) in y.iter().enumerate() {
                let idx = offset + i as isize;
                if idx >= 0 && (idx as usize) < n {
                    row[idx as usize] += v;
                }
            }
        }
    }
    out
}

/// Synthesises a grid recording from `spec`. Bit-identical for a given seed.
pub fn generate(spec: &SynthSpec, geometry: &GridGeometry, rate: f64) -> Result<GridRecording> {
    geometry.validate()?;
    spec.validate(geometry, rate)?;
    let n = (spec.duration_s * rate).round() as usize;
    let sources = row_sources(spec, geometry, rate, n);
    let active = spec.active_column.unwrap_or(geometry.cols / 2);
    let envelope: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            spec.amplitude_profile.at(t, spec.duration_s) * spec.envelope(t)
        })
        .collect();
    let noise_std = spec
        .snr_db
        .map_or(0.0, |snr| spec.amplitude_profile.mean() * 10f64.powf(-snr / 20.0));

    let channels: Vec<Option<Vec<f64>>> = (0..geometry.n_positions())
        .into_par_iter()
        .map(|idx| {
            let (col, row) = (idx / geometry.rows, idx % geometry.rows);
            if geometry.is_missing(row, col) {
                return None;
            }
            let att = spec.column_attenuation.powi(col.abs_diff(active) as i32);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(idx as u64 + 1);
            let x = sources[row]
                .iter()
                .zip(&envelope)
                .map(|(s, e)| {
                    let noise: f64 = if noise_std > 0.0 {
                        noise_std * Distribution::<f64>::sample(&StandardNormal, &mut rng)
                    } else {
                        0.0
                    };
                    att * e * s + noise
                })
                .collect();
            Some(x)
        })
        .collect();

    let force = spec.force_n.map(|level| {
        let reference = spec.amplitude_profile.at(0.0, spec.duration_s);
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                let follow = if reference > 0.0 {
                    spec.amplitude_profile.at(t, spec.duration_s) / reference
                } else {
                    1.0
                };
                level * follow * spec.envelope(t)
            })
            .collect()
    });

    let meta = TrialMetadata {
        subject_id: "synthetic".into(),
        mvc_percent: 10,
        condition: Condition::BeforeFatigue,
        sampling_rate_hz: rate,
        target_force_n: spec.force_n,
        trim: TrimPolicy::default(),
    };
    GridRecording::new(geometry.clone(), meta, channels, force, 0.0)
}

/// Rounds every sample to a multiple of `quantum`, keeping files compact.
pub fn quantize(rec: &GridRecording, quantum: f64) -> Result<GridRecording> {
    let q = |x: &[f64]| -> Result<Vec<f64>> { Ok(x.iter().map(|v| (v / quantum).round() * quantum).collect()) };
    let out = rec.map_channels(q)?;
    let force = rec.force().map(|f| f.iter().map(|v| (v / quantum).round() * quantum).collect());
    let channels = out.channels().to_vec();
    GridRecording::new(out.geometry, out.meta, channels, force, out.start_time_s)
}

/// JSON accepted by the `synth` command: a [`SynthSpec`] plus trial labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFile {
    #[serde(flatten)]
    pub spec: SynthSpec,
    #[serde(default = "default_rate")]
    pub sampling_rate_hz: f64,
    #[serde(default = "default_subject")]
    pub subject_id: String,
    #[serde(default = "default_mvc")]
    pub mvc_percent: u32,
    #[serde(default = "default_condition")]
    pub condition: Condition,
}

fn default_rate() -> f64 {
    2048.0
}

fn default_subject() -> String {
    "synthetic".into()
}

fn default_mvc() -> u32 {
    10
}

fn default_condition() -> Condition {
    Condition::BeforeFatigue
}

impl SynthFile {
    /// Generates the recording described by the file, labelled and quantised.
    pub fn generate(&self) -> Result<GridRecording> {
        let geometry = GridGeometry::default();
        let mut rec = generate(&self.spec, &geometry, self.sampling_rate_hz)?;
        rec.meta.subject_id = self.subject_id.clone();
        rec.meta.mvc_percent = self.mvc_percent;
        rec.meta.condition = self.condition;
        rec.meta.trim = TrimPolicy {
            fixed_trim_s: self.spec.ramp_s.max(TrimPolicy::default().fixed_trim_s),
            ..TrimPolicy::default()
        };
        rec.meta.validate()?;
        quantize(&rec, FILE_QUANTUM_MV)
    }
}

/// One trial of the bundled protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTrial {
    pub file_stem: String,
    pub meta: TrialMetadata,
    pub spec: SynthSpec,
}

pub const PROTOCOL_RATE_HZ: f64 = 2048.0;

/// The seven trials of the protocol: 10/20/40/60/90% MVC before fatigue, the
/// 70% exhaustion test and the final 10% test after fatigue.
pub fn protocol_trials() -> Vec<ProtocolTrial> {
    // (mvc, condition, duration, cv start/end, centre, compression, amp start/end, seed)
    type Row = (u32, Condition, f64, (f64, f64), f64, f64, (f64, f64), u64);
    let table: [Row; 7] = [
        (10, Condition::BeforeFatigue, 21.0, (4.6, 4.5), 140.0, 0.97, (0.10, 0.11), 11),
        (20, Condition::BeforeFatigue, 21.0, (4.5, 4.0), 135.0, 0.90, (0.20, 0.26), 12),
        (40, Condition::BeforeFatigue, 21.0, (4.4, 3.4), 130.0, 0.80, (0.40, 0.64), 13),
        (60, Condition::BeforeFatigue, 21.0, (4.3, 2.8), 125.0, 0.68, (0.60, 1.14), 14),
        (90, Condition::BeforeFatigue, 21.0, (4.2, 2.4), 120.0, 0.55, (0.90, 2.00), 15),
        (70, Condition::Fatigue, 31.0, (3.4, 2.2), 100.0, 0.55, (0.70, 1.12), 16),
        (10, Condition::AfterFatigue, 91.0, (4.85, 5.0), 150.0, 1.0, (0.10, 0.10), 17),
    ];
    table
        .into_iter()
        .map(|(mvc, condition, duration, (cv0, cv1), center, compression, (a0, a1), seed)| {
            let spec = SynthSpec {
                cv_profile: Profile::Linear { start: cv0, end: cv1 },
                spectral_shape: SpectralShape {
                    center_hz: center,
                    width_hz: 40.0,
                    compression,
                },
                amplitude_profile: Profile::Linear { start: a0, end: a1 },
                iz_sd_index: 5,
                snr_db: Some(25.0),
                duration_s: duration,
                seed,
                active_column: None,
                column_attenuation: 0.5,
                ramp_s: 0.5,
                force_n: Some(mvc as f64 * 4.0),
            };
            let meta = TrialMetadata {
                subject_id: "synthetic-01".into(),
                mvc_percent: mvc,
                condition,
                sampling_rate_hz: PROTOCOL_RATE_HZ,
                target_force_n: Some(mvc as f64 * 4.0),
                trim: TrimPolicy::default(),
            };
            ProtocolTrial {
                file_stem: format!("mvc{mvc:02}_{condition}"),
                meta,
                spec,
            }
        })
        .collect()
}

/// Writes the protocol trials as CSV + JSON pairs into `out_dir`, returning
/// the written paths (CSV then JSON for each trial).
pub fn make_protocol_dataset(out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let geometry = GridGeometry::default();
    let written = protocol_trials()
        .into_par_iter()
        .map(|trial| {
            let mut rec = generate(&trial.spec, &geometry, trial.meta.sampling_rate_hz)?;
            rec.meta = trial.meta.clone();
            let rec = quantize(&rec, FILE_QUANTUM_MV)?;
            let csv = out_dir.join(format!("{}.csv", trial.file_stem));
            let json = out_dir.join(format!("{}.json", trial.file_stem));
            save_trial(&rec, &csv, &json)?;
            Ok(vec![csv, json])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(written.into_iter().flatten().collect())
}
