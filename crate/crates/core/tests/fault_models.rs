use hif_core::fault_models::{render_fault_current, ArcLaw, ArcParams, FaultSpec, HifStage, HifStageSchedule};
use hif_core::feeder_sim::{Phase, SourceSpec};
use hif_core::signal_features::{extract_features, harmonic_spectrum, make_windows, FeatureVector};
use hif_core::waveform::rms;

const RATE: f64 = 27_700.0;

fn render(stage: HifStage, seed: u64) -> hif_core::WaveformRecord {
    let spec = FaultSpec::hif(Phase::A, 1, HifStageSchedule::single(stage, 0.0, 1.0));
    render_fault_current(&spec, &SourceSpec::default(), 1.0, RATE, seed).unwrap()
}

fn windows_features(stage: HifStage, seed: u64) -> Vec<(FeatureVector, Vec<f64>, f64)> {
    let rec = render(stage, seed);
    make_windows(&rec, "I_F", 50.0, 10, 0.5)
        .unwrap()
        .iter()
        .map(|w| {
            let s = harmonic_spectrum(w, 13).unwrap();
            (extract_features(w).unwrap(), s.amplitudes, s.dc)
        })
        .collect()
}

#[test]
fn sizzling_has_rectified_sine_spectrum() {
    let peak = 2.0;
    for (_, a, dc) in windows_features(HifStage::Sizzling { peak }, 1) {
        assert!((dc / peak - 2.0 / std::f64::consts::PI).abs() < 0.01 * 0.6366);
        assert!((a[2] / peak - 4.0 / (3.0 * std::f64::consts::PI)).abs() < 0.01 * 0.4244);
        for k in (1..=13).step_by(2) {
            assert!(a[k] < 0.01 * peak, "odd harmonic {k}: {}", a[k]);
        }
    }
}

#[test]
fn sawtooth_harmonics_fall_as_one_over_k() {
    let peak = 0.5;
    for (_, a, _) in windows_features(HifStage::InitialSawtooth { peak }, 1) {
        for k in 1..=7 {
            let want = 2.0 * peak / (std::f64::consts::PI * k as f64);
            assert!((a[k] - want).abs() <= 0.02 * want, "k = {k}: {} vs {want}", a[k]);
        }
    }
}

#[test]
fn sawtooth_stays_far_below_load_current() {
    let rec = render(HifStage::InitialSawtooth { peak: 0.5 }, 0);
    assert!(rms(rec.channel("I_F").unwrap()) < 1.0);
}

#[test]
fn negative_half_arc_is_one_sided() {
    let stage = HifStage::NegativeHalfArc {
        arc: ArcParams::default(),
        ignition_probability: 0.7,
    };
    for seed in 0..3 {
        for (f, _, _) in windows_features(stage, seed) {
            assert!(f.asymmetry > 0.9, "asymmetry {}", f.asymmetry);
        }
        // 50 cycles of positive half-cycles carry leakage only
        let rec = render(stage, seed);
        let (i, v) = (rec.channel("I_F").unwrap(), rec.channel("V_F").unwrap());
        for (iv, vv) in i.iter().zip(v).take(50 * 554) {
            if *vv > 0.0 {
                assert!(*iv <= 1e-3);
            }
        }
    }
}

#[test]
fn stable_arc_is_symmetric_and_distorted() {
    let stage = HifStage::StableArc { arc: ArcParams::default() };
    for seed in 0..3 {
        for (f, _, dc) in windows_features(stage, seed) {
            assert!(f.thd > 0.05, "thd {}", f.thd);
            assert!(f.asymmetry < 0.05, "asymmetry {}", f.asymmetry);
            assert!(dc.abs() < 0.02 * f.fundamental);
        }
    }
}

#[test]
fn stable_arc_vi_trace_has_flat_centre() {
    let rec = render(
        HifStage::StableArc {
            arc: ArcParams { jitter: 0.0, ..ArcParams::default() },
        },
        0,
    );
    let (i, v) = (rec.channel("I_F").unwrap(), rec.channel("V_F").unwrap());
    for (iv, vv) in i.iter().zip(v) {
        if vv.abs() < 80.0 {
            assert!(iv.abs() <= 1e-3);
        }
        assert!(iv.abs() <= (325.3 - 80.0) / 40.0 + 1e-3);
    }
}

#[test]
fn arc_law_is_odd_for_symmetric_parameters() {
    let law = ArcLaw {
        vp: 70.0,
        vn: 70.0,
        rp: 35.0,
        rn: 35.0,
        positive: true,
        negative: true,
        leakage: 0.0,
    };
    for k in 0..=400 {
        let v = -400.0 + 2.0 * k as f64;
        assert_eq!(law.eval(-v).0, -law.eval(v).0);
    }
}

#[test]
fn lif_render_is_seed_invariant() {
    let spec = FaultSpec::lif(Phase::B, 1, 0.0, 5.0);
    let a = render_fault_current(&spec, &SourceSpec::default(), 0.2, RATE, 1).unwrap();
    let b = render_fault_current(&spec, &SourceSpec::default(), 0.2, RATE, 99).unwrap();
    assert_eq!(a, b);
    assert!((rms(a.channel("I_F").unwrap()) - 46.0).abs() < 1e-6 * 46.0);
}
