use std::f64::consts::{PI, SQRT_2};

use hif_core::signal_features::{
    extract_features, harmonic_spectrum, make_windows, window_geometry, AnalysisWindow, FeatureVector, MAX_HARMONIC,
};
use hif_core::{ChannelInfo, ChannelRole, WaveformRecord};
use proptest::prelude::*;

const RATE: f64 = 5000.0;
const F0: f64 = 50.0;
const SPC: usize = 100;

fn window(x: Vec<f64>) -> AnalysisWindow {
    AnalysisWindow::new(x, RATE, F0, "I_A", 0.0).unwrap()
}

/// Direct DFT amplitude at integer harmonic `k` of a whole-cycle window.
fn dft_amplitude(x: &[f64], cycles: usize, k: usize) -> f64 {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let th = 2.0 * PI * (k * cycles) as f64 * i as f64 / n;
        re += v * th.cos();
        im -= v * th.sin();
    }
    let scale = if k == 0 { 1.0 } else { 2.0 };
    scale * re.hypot(im) / n
}

fn harmonic_signal(dc: f64, amps: &[f64], phases: &[f64], cycles: usize) -> Vec<f64> {
    (0..cycles * SPC)
        .map(|i| {
            let t = i as f64 / RATE;
            dc + amps
                .iter()
                .zip(phases)
                .enumerate()
                .map(|(k, (a, p))| a * (2.0 * PI * F0 * (k + 1) as f64 * t + p).sin())
                .sum::<f64>()
        })
        .collect()
}

#[test]
fn pure_sine_features() {
    let f = extract_features(&window(harmonic_signal(0.0, &[10.0], &[0.3], 10))).unwrap();
    assert!((f.rms - 10.0 / SQRT_2).abs() < 1e-9);
    assert!((f.fundamental - 10.0).abs() < 1e-9);
    assert!(f.thd < 1e-12 && f.dc.abs() < 1e-12);
    assert!((f.crest_factor - SQRT_2).abs() < 1e-3);
    assert!(f.asymmetry < 1e-9);
    assert!((f.envelope_mean - 10.0).abs() < 1e-6 && f.modulation_index < 1e-6);
    assert!(f.interharmonic_fraction < 1e-12);
}

#[test]
fn window_geometry_at_default_rate() {
    let (len, stride) = window_geometry(27_700.0, 50.0, 10, 0.5).unwrap();
    assert_eq!((len, stride), (5540, 2770));
    let rec = WaveformRecord::new(
        27_700.0,
        0.0,
        vec![ChannelInfo::new("I_A", "A", ChannelRole::PhaseCurrent)],
        vec![vec![0.0; 27_700]],
    )
    .unwrap();
    let w = make_windows(&rec, "I_A", 50.0, 10, 0.5).unwrap();
    assert_eq!(w.len(), 9);
    assert!((w[1].start_time() - 0.1).abs() < 1e-12);
    assert!(window_geometry(27_700.0, 50.0, 10, 0.95).is_err());
}

#[test]
fn partial_cycles_and_aliasing_rejected() {
    assert!(AnalysisWindow::new(vec![0.0; 150], RATE, F0, "x", 0.0).is_err());
    assert!(AnalysisWindow::new(vec![0.0; 100], RATE, F0, "x", 0.0).is_err());
    let w = AnalysisWindow::new(vec![0.0; 40], 1000.0, F0, "x", 0.0).unwrap();
    assert!(harmonic_spectrum(&w, MAX_HARMONIC).is_err());
}

#[test]
fn names_match_vector_length() {
    assert_eq!(FeatureVector::names().len(), FeatureVector::LEN);
    assert_eq!(FeatureVector::LEN, 23);
}

fn signal() -> impl Strategy<Value = Vec<f64>> {
    (2usize..8).prop_flat_map(|c| prop::collection::vec(-50.0f64..50.0, c * SPC))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn spectrum_matches_direct_dft(x in signal()) {
        let w = window(x.clone());
        let hs = harmonic_spectrum(&w, MAX_HARMONIC).unwrap();
        let tol = 1e-9 * (1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        for k in 0..=MAX_HARMONIC {
            prop_assert!((hs.amplitudes[k] - dft_amplitude(&x, w.cycles(), k)).abs() <= tol);
        }
    }

    #[test]
    fn parseval_for_band_limited_signals(
        dc in -5.0f64..5.0,
        amps in prop::collection::vec(0.0f64..20.0, MAX_HARMONIC),
        phases in prop::collection::vec(-PI..PI, MAX_HARMONIC),
        cycles in 2usize..12,
    ) {
        let x = harmonic_signal(dc, &amps, &phases, cycles);
        let f = extract_features(&window(x.clone())).unwrap();
        let energy = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let from_spectrum = dc * dc + amps.iter().map(|a| a * a / 2.0).sum::<f64>();
        prop_assert!((energy - from_spectrum).abs() <= 1e-9 * (1.0 + energy));
        prop_assert!((f.rms * f.rms - energy).abs() <= 1e-9 * (1.0 + energy));
        prop_assert!(f.interharmonic_fraction <= 1e-9);
        let all = f.to_vec();
        for (k, a) in amps.iter().enumerate() {
            prop_assert!((all[2 + k] - a).abs() <= 1e-9 * (1.0 + a));
        }
    }

    #[test]
    fn amplitude_scaling(x in signal(), c in 0.01f64..100.0) {
        let f = extract_features(&window(x.clone())).unwrap().to_vec();
        let g = extract_features(&window(x.iter().map(|v| v * c).collect())).unwrap().to_vec();
        let names = FeatureVector::names();
        for ((name, a), b) in names.iter().zip(&f).zip(&g) {
            let scales = matches!(name.as_str(), "rms" | "dc" | "envelope_mean" | "envelope_std")
                || name.starts_with('h');
            let expect = if scales { a * c } else { *a };
            prop_assert!((b - expect).abs() <= 1e-8 * (1.0 + expect.abs()), "{name}: {b} vs {expect}");
        }
    }

    #[test]
    fn whole_cycle_rotation_keeps_spectral_features(x in signal(), shift in 1usize..8) {
        let w = window(x.clone());
        let m = (shift % w.cycles()) * SPC;
        let mut y = x.clone();
        y.rotate_left(m);
        let a = harmonic_spectrum(&w, MAX_HARMONIC).unwrap();
        let b = harmonic_spectrum(&window(y.clone()), MAX_HARMONIC).unwrap();
        for k in 0..=MAX_HARMONIC {
            prop_assert!((a.amplitudes[k] - b.amplitudes[k]).abs() <= 1e-9 * (1.0 + a.amplitudes[k]));
        }
        let f = extract_features(&w).unwrap();
        let g = extract_features(&window(y)).unwrap();
        for (p, q) in [
            (f.rms, g.rms),
            (f.thd, g.thd),
            (f.even_odd_ratio, g.even_odd_ratio),
            (f.asymmetry, g.asymmetry),
            (f.crest_factor, g.crest_factor),
            (f.interharmonic_fraction, g.interharmonic_fraction),
        ] {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
        }
    }
}
