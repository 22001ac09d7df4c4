mod common;

use std::f64::consts::PI;

use common::*;
use myograph::pipeline::analyze_recording;
use myograph::preprocess::{double_differential, monopolar, single_differential};
use myograph::signal::save_trial;
use myograph::synth::{generate, make_protocol_dataset, quantize, Profile, SpectralShape, FILE_QUANTUM_MV};
use myograph::{
    estimate_cv, mnf, psd, AnalysisConfig, BandSpec, Condition, CvConfig, Error, GridGeometry, PsdConfig, SynthSpec,
};

#[test]
fn noiseless_dd_channels_are_pure_shifts() {
    let spec = SynthSpec {
        snr_db: None,
        ..SynthSpec::stationary(4.0, 2.0, 31)
    };
    let rec = generate(&spec, &GridGeometry::default(), FS).unwrap();
    let dd = double_differential(&single_differential(&rec, 2).unwrap()).unwrap();
    let (a, b) = (&dd.channels[7], &dd.channels[8]);
    let delay = IED / 4.0 * FS; // 2 ms
    assert_eq!(xcorr_peak_lag(a, b, 20), delay.round() as isize);

    let predicted = sinc_delay(a, delay, 48);
    let inner = 200..a.len() - 200;
    let err: f64 = inner.clone().map(|i| (b[i] - predicted[i]).powi(2)).sum();
    let energy: f64 = inner.map(|i| b[i] * b[i]).sum();
    assert!(err / energy < 1e-4, "{}", err / energy);
}

#[test]
fn same_seed_same_output() {
    let spec = SynthSpec {
        force_n: Some(50.0),
        ramp_s: 0.3,
        ..SynthSpec::stationary(3.5, 1.5, 77)
    };
    let g = GridGeometry::default();
    let a = generate(&spec, &g, FS).unwrap();
    let b = generate(&spec, &g, FS).unwrap();
    assert_eq!(a, b);
    let other = generate(&SynthSpec { seed: 78, ..spec }, &g, FS).unwrap();
    assert_ne!(a, other);

    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str| {
        let (csv, json) = (dir.path().join(format!("{name}.csv")), dir.path().join(format!("{name}.json")));
        save_trial(&quantize(&a, FILE_QUANTUM_MV).unwrap(), &csv, &json).unwrap();
        (std::fs::read(csv).unwrap(), std::fs::read(json).unwrap())
    };
    assert_eq!(write("x"), write("y"));
}

#[test]
fn halving_the_spectrum_halves_mnf() {
    let duration = 20.0;
    let n = (duration * FS) as usize;
    let w = FS as usize;
    let band = BandSpec::default();
    let cfg = PsdConfig::default();
    // the programmed scale at each window centre
    let scale = |t: f64| 1.0 - 0.5 * t / duration;
    let expected = scale(duration - 0.5) / scale(0.5);
    for seed in 0..5 {
        let spec = SynthSpec {
            spectral_shape: SpectralShape {
                center_hz: 160.0,
                width_hz: 40.0,
                compression: 0.5,
            },
            snr_db: None,
            ..SynthSpec::stationary(4.0, duration, seed)
        };
        let rec = generate(&spec, &GridGeometry::default(), FS).unwrap();
        let x = &monopolar(&rec, 2).unwrap().channels[11];
        let onset = mnf(&psd(&x[..w], FS, &band, false, &cfg).unwrap()).unwrap();
        let end = mnf(&psd(&x[n - w..], FS, &band, false, &cfg).unwrap()).unwrap();
        let ratio = end / onset;
        assert!((ratio - 0.5).abs() <= 0.05, "seed {seed}: {ratio}");
        assert!((ratio - expected).abs() <= 0.05, "seed {seed}: {ratio} vs {expected}");
    }
}

/// Power response of the bilinear Butterworth high-pass and low-pass pair,
/// squared again for forward-backward filtering.
fn zero_phase_power(f: f64, band: &BandSpec) -> f64 {
    let w = |x: f64| (PI * x / FS).tan();
    let n = 2 * band.order as i32;
    let lp = 1.0 / (1.0 + (w(f) / w(band.high_hz)).powi(n));
    let hp = 1.0 / (1.0 + (w(band.low_hz) / w(f)).powi(n));
    (lp * hp).powi(2)
}

/// MNF of a distal SD channel implied by the programmed spectrum: Gaussian
/// source, two-pad spatial difference at delay `ied / cv`, white monopolar
/// noise, then the band-pass.
fn programmed_mnf(center: f64, width: f64, cv: f64, amp: f64, snr_db: f64, band: &BandSpec) -> f64 {
    let df = 0.05;
    let grid: Vec<f64> = (1..(FS / 2.0 / df) as usize).map(|k| k as f64 * df).collect();
    let gauss = |f: f64| (-0.5 * ((f - center) / width).powi(2)).exp();
    let z: f64 = grid.iter().map(|&f| gauss(f)).sum::<f64>() * df;
    let delay = IED / cv;
    let sigma2 = (amp * 10f64.powf(-snr_db / 20.0)).powi(2);
    let density = |f: f64| {
        let source = amp * amp * gauss(f) / z * 4.0 * (PI * f * delay).sin().powi(2);
        let noise = 2.0 * sigma2 / (FS / 2.0);
        (source + noise) * zero_phase_power(f, band)
    };
    let power: Vec<f64> = grid.iter().map(|&f| density(f)).collect();
    band_integral(&grid, &power, band.low_hz, band.high_hz, |f| f)
        / band_integral(&grid, &power, band.low_hz, band.high_hz, |_| 1.0)
}

#[test]
fn pipeline_recovers_programmed_parameters() {
    let config = AnalysisConfig::default();
    let g = GridGeometry::default();
    let cases = [(4.0, 120.0, 40.0, 0.5, 20.0), (3.0, 90.0, 30.0, 1.2, 20.0), (5.5, 150.0, 45.0, 0.2, 30.0)];
    for (cv, center, width, amp, snr) in cases {
        let expected_mnf = programmed_mnf(center, width, cv, amp, snr, &config.band);
        for seed in 0..50 {
            let spec = SynthSpec {
                spectral_shape: SpectralShape {
                    center_hz: center,
                    width_hz: width,
                    compression: 1.0,
                },
                amplitude_profile: Profile::Constant(amp),
                snr_db: Some(snr),
                ..SynthSpec::stationary(cv, 5.0, 500 + seed)
            };
            let rec = generate(&spec, &g, FS).unwrap();
            let report = analyze_recording(&rec, &config, input()).unwrap();
            let ws = &report.whole_signal;
            let res = ws.psd.resolution_hz;
            let got_cv = ws.cv.mean_cv_m_s.unwrap();
            assert!((got_cv - cv).abs() <= 0.1, "cv {cv} seed {seed}: {got_cv}");
            assert!(
                (ws.mnf_hz - expected_mnf).abs() <= 2.0 * res,
                "cv {cv} seed {seed}: mnf {} vs {expected_mnf}",
                ws.mnf_hz
            );
        }
    }
}

#[test]
fn drowned_signal_is_rarely_accepted() {
    let g = GridGeometry::default();
    let cfg = CvConfig::default();
    let mut total = 0;
    let mut accepted = 0;
    for seed in 0..40 {
        let spec = SynthSpec {
            snr_db: Some(-20.0),
            ..SynthSpec::stationary(4.0, 3.0, 900 + seed)
        };
        let rec = generate(&spec, &g, FS).unwrap();
        let dd = double_differential(&single_differential(&rec, 2).unwrap()).unwrap();
        for k in 0..5 {
            let est = estimate_cv(&dd, &[7, 8], (0.5 * k as f64, 0.5), &cfg).unwrap();
            total += 1;
            accepted += est.accepted as usize;
        }
    }
    let rate = accepted as f64 / total as f64;
    assert!(rate < 0.10, "{accepted}/{total}");
}

#[test]
fn invalid_specs_are_rejected() {
    let g = GridGeometry::default();
    let base = SynthSpec::stationary(4.0, 2.0, 1);
    let bad = [
        SynthSpec {
            cv_profile: Profile::Linear { start: 4.0, end: 9.0 },
            ..base.clone()
        },
        SynthSpec {
            duration_s: 0.0,
            ..base.clone()
        },
        SynthSpec {
            spectral_shape: SpectralShape {
                width_hz: 0.0,
                ..base.spectral_shape
            },
            ..base.clone()
        },
        SynthSpec {
            iz_sd_index: 12,
            ..base.clone()
        },
    ];
    for spec in bad {
        assert!(matches!(generate(&spec, &g, FS), Err(Error::SpecInvalid(_))));
    }
}

#[test]
fn protocol_dataset_orders_levels() {
    let dir = tempfile::tempdir().unwrap();
    let files = make_protocol_dataset(dir.path()).unwrap();
    assert_eq!(files.len(), 14);
    assert_eq!(files.iter().filter(|p| p.extension().unwrap() == "csv").count(), 7);
    assert!(files.iter().all(|p| p.exists()));

    let trials: Vec<_> = files
        .chunks(2)
        .map(|p| myograph::TrialInput {
            signal: p[0].clone(),
            meta: p[1].clone(),
        })
        .collect();
    let session = myograph::analyze_session(&trials, &AnalysisConfig::default()).unwrap();
    let find = |mvc: u32, cond: Condition| {
        session
            .trials
            .iter()
            .find(|t| t.mvc_percent == mvc && t.condition == cond)
            .unwrap()
    };
    let cv = |mvc, cond| find(mvc, cond).whole_signal.cv.mean_cv_m_s.unwrap();
    let chain = [
        cv(10, Condition::AfterFatigue),
        cv(10, Condition::BeforeFatigue),
        cv(20, Condition::BeforeFatigue),
        cv(40, Condition::BeforeFatigue),
        cv(60, Condition::BeforeFatigue),
        cv(90, Condition::BeforeFatigue),
        cv(70, Condition::Fatigue),
    ];
    assert!(chain.windows(2).all(|w| w[0] > w[1]), "{chain:?}");
    let fatigue_mnf = find(70, Condition::Fatigue).whole_signal.mnf_hz;
    assert!(session
        .trials
        .iter()
        .filter(|t| t.condition != Condition::Fatigue)
        .all(|t| t.whole_signal.mnf_hz > fatigue_mnf));
}
