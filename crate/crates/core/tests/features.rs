mod common;

use common::*;
use myograph::{mdf, mnf, psd, rms, BandSpec, Error, PsdConfig, PsdEstimate};
use proptest::prelude::*;

fn tone(freq: f64, n: usize) -> Vec<f64> {
    MultiTone { tones: vec![(freq, 1.0, 0.3)] }.sample(n, FS, 0.0)
}

#[test]
fn unit_sinusoid_rms() {
    // 50 Hz over exactly 25 periods
    let x = tone(50.0, 1024);
    assert!((rms(&x).unwrap() - 0.5f64.sqrt()).abs() < 1e-6);
}

#[test]
fn rms_by_hand() {
    assert_eq!(rms(&[3.0; 17]).unwrap(), 3.0);
    let expected = ((9.0 + 16.0) / 2.0f64).sqrt();
    assert!((rms(&[3.0, -4.0]).unwrap() - expected).abs() < 1e-15);
    assert!(matches!(rms(&[]), Err(Error::EmptySignal)));
}

#[test]
fn median_of_a_piecewise_flat_density() {
    // a quarter of the power uniformly on [20, 100], the rest on [100, 400]
    let res = 8.0;
    let freqs: Vec<f64> = (0..=52).map(|k| k as f64 * res).collect();
    let density = |f: f64| if f < 100.0 { 0.25 / 80.0 } else { 0.75 / 300.0 };
    let power = freqs.iter().map(|&f| density(f)).collect();
    let p = PsdEstimate {
        freqs_hz: freqs,
        power,
        resolution_hz: res,
        band: BandSpec::default(),
        normalized: false,
    };
    // inverse CDF: 0.25 reached at 100 Hz, the remaining 0.25 takes 100 Hz more
    let expected = 100.0 + 0.25 / (0.75 / 300.0);
    assert!((mdf(&p).unwrap() - expected).abs() <= res, "{}", mdf(&p).unwrap());
}

#[test]
fn symmetric_spectra_have_mean_near_median() {
    let band = BandSpec::default();
    for (centre, seed) in [(150.0, 1), (210.0, 2), (260.0, 3)] {
        let x = MultiTone {
            tones: vec![(centre - 40.0, 1.0, 0.2), (centre, 1.0, 1.1), (centre + 40.0, 1.0, 2.9)],
        }
        .sample(16384, FS, 0.0);
        let p = psd(&x, FS, &band, false, &PsdConfig::default()).unwrap();
        assert!((mnf(&p).unwrap() - mdf(&p).unwrap()).abs() < p.resolution_hz, "seed {seed}");
    }
}

#[test]
fn single_tone_peak_and_centroid() {
    let band = BandSpec::default();
    let p = psd(&tone(100.0, 8192), FS, &band, false, &PsdConfig::default()).unwrap();
    let peak = p
        .power
        .iter()
        .enumerate()
        .fold((0, 0.0), |b, (k, &v)| if v > b.1 { (k, v) } else { b })
        .0;
    assert!((p.freqs_hz[peak] - 100.0).abs() <= p.resolution_hz);
    assert!((mnf(&p).unwrap() - 100.0).abs() <= p.resolution_hz);
    assert!((mdf(&p).unwrap() - 100.0).abs() <= p.resolution_hz);
}

#[test]
fn equal_tones_average_to_midpoint() {
    let x = MultiTone {
        tones: vec![(100.0, 1.0, 0.1), (300.0, 1.0, 1.7)],
    }
    .sample(8192, FS, 0.0);
    let p = psd(&x, FS, &BandSpec::default(), true, &PsdConfig::default()).unwrap();
    // oracle: power-weighted mean of two equal point masses
    let expected = 0.5 * (100.0 + 300.0);
    assert!((mnf(&p).unwrap() - expected).abs() <= p.resolution_hz);
}

#[test]
fn white_noise_is_flat_across_the_band() {
    let x = white(60 * 2048, 3);
    let p = psd(&x, FS, &BandSpec::default(), true, &PsdConfig::default()).unwrap();
    // uniform density on [20, 400]: mean and median both at the midpoint
    let mid = 0.5 * (20.0 + 400.0);
    assert!((mnf(&p).unwrap() - mid).abs() <= p.resolution_hz / 2.0, "{}", mnf(&p).unwrap());
    assert!((mdf(&p).unwrap() - mid).abs() <= p.resolution_hz / 2.0, "{}", mdf(&p).unwrap());
}

#[test]
fn parseval_on_white_noise() {
    let band = BandSpec::default();
    for seed in 0..5 {
        let x = white(20 * 2048, seed);
        let p = psd(&x, FS, &band, false, &PsdConfig::default()).unwrap();
        let expected = variance(&x) * (band.high_hz - band.low_hz) / (FS / 2.0);
        let got = band_integral(&p.freqs_hz, &p.power, band.low_hz, band.high_hz, |_| 1.0);
        assert!((got / expected - 1.0).abs() < 0.05, "seed {seed}: {got} vs {expected}");
    }
}

#[test]
fn normalised_psd_integrates_to_one() {
    let band = BandSpec::default();
    let fixtures = [
        tone(100.0, 4096),
        white(4096, 9),
        MultiTone::random(12, 25.0, 390.0, 4).sample(3000, FS, 0.0),
    ];
    for x in fixtures {
        let p = psd(&x, FS, &band, true, &PsdConfig::default()).unwrap();
        let area = band_integral(&p.freqs_hz, &p.power, band.low_hz, band.high_hz, |_| 1.0);
        assert!((area - 1.0).abs() < 1e-9, "{area}");
        assert!(p.power.iter().all(|&v| v >= 0.0));
        assert!(p.freqs_hz.windows(2).all(|w| w[1] > w[0]));
        assert!(p.freqs_hz[0] <= band.low_hz && *p.freqs_hz.last().unwrap() >= band.high_hz);
    }
}

#[test]
fn mnf_matches_direct_quadrature() {
    let band = BandSpec::default();
    let x = MultiTone::random(20, 30.0, 380.0, 11).sample(4096, FS, 0.0);
    let p = psd(&x, FS, &band, false, &PsdConfig::default()).unwrap();
    let num = band_integral(&p.freqs_hz, &p.power, band.low_hz, band.high_hz, |f| f);
    let den = band_integral(&p.freqs_hz, &p.power, band.low_hz, band.high_hz, |_| 1.0);
    assert!((mnf(&p).unwrap() - num / den).abs() < 1e-9);
}

#[test]
fn too_short_and_silent_inputs() {
    let band = BandSpec::default();
    assert!(matches!(
        psd(&[1.0; 511], FS, &band, false, &PsdConfig::default()),
        Err(Error::SignalTooShort { needed: 512, found: 511 })
    ));
    let p = psd(&[0.0; 2048], FS, &band, false, &PsdConfig::default()).unwrap();
    assert!(matches!(mnf(&p), Err(Error::ZeroPower)));
    assert!(matches!(psd(&[0.0; 2048], FS, &band, true, &PsdConfig::default()), Err(Error::ZeroPower)));
}

#[test]
fn frequency_shift_moves_mnf_and_mdf() {
    let band = BandSpec::default();
    let base = MultiTone::random(10, 60.0, 200.0, 21);
    let shift = 57.0;
    let shifted = MultiTone {
        tones: base.tones.iter().map(|&(f, a, p)| (f + shift, a, p)).collect(),
    };
    let cfg = PsdConfig::default();
    let p0 = psd(&base.sample(16384, FS, 0.0), FS, &band, true, &cfg).unwrap();
    let p1 = psd(&shifted.sample(16384, FS, 0.0), FS, &band, true, &cfg).unwrap();
    let res = p0.resolution_hz;
    assert!((mnf(&p1).unwrap() - mnf(&p0).unwrap() - shift).abs() <= res);
    assert!((mdf(&p1).unwrap() - mdf(&p0).unwrap() - shift).abs() <= res);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rms_scales_with_gain(seed in 0u64..1000, k in -50.0f64..50.0) {
        let x = white(700, seed);
        let scaled: Vec<f64> = x.iter().map(|v| k * v).collect();
        let a = rms(&scaled).unwrap();
        let b = k.abs() * rms(&x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn spectral_indicators_ignore_gain(seed in 0u64..1000, k in 0.01f64..100.0) {
        let band = BandSpec::default();
        let cfg = PsdConfig::default();
        let x = white(1024, seed);
        let scaled: Vec<f64> = x.iter().map(|v| k * v).collect();
        let p0 = psd(&x, FS, &band, false, &cfg).unwrap();
        let p1 = psd(&scaled, FS, &band, false, &cfg).unwrap();
        prop_assert!((mnf(&p0).unwrap() - mnf(&p1).unwrap()).abs() < 1e-9);
        prop_assert!((mdf(&p0).unwrap() - mdf(&p1).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn indicators_stay_in_band(seed in 0u64..1000, n_tones in 1usize..6) {
        let band = BandSpec::default();
        let x = MultiTone::random(n_tones, 5.0, 900.0, seed).sample(1024, FS, 0.0);
        if let Ok(p) = psd(&x, FS, &band, false, &PsdConfig::default()) {
            if let (Ok(m), Ok(d)) = (mnf(&p), mdf(&p)) {
                prop_assert!((band.low_hz..=band.high_hz).contains(&m));
                prop_assert!((band.low_hz..=band.high_hz).contains(&d));
            }
        }
    }
}
