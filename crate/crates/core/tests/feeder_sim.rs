mod common;

use common::{oracle_errors, random_linear_case};
use hif_core::fault_models::{lif_limiting_resistance, ArcParams, FaultSpec, HifStage, HifStageSchedule, ScheduledStage};
use hif_core::feeder_sim::{
    simulate, simulate_with_diagnostics, LoadElement, Phase, SimConfig, SourceSpec,
};
use hif_core::line_network::{build_feeder, ConductorGeometry, LineParameters};
use hif_core::waveform::rms;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(rho: f64) -> LineParameters {
    LineParameters::from_geometry(&ConductorGeometry::default(), 50.0, rho).unwrap()
}

#[test]
fn random_linear_configurations_match_phasor_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..10 {
        let (p, length, cfg) = random_linear_case(&mut rng);
        let (phasor_err, sim_err) = oracle_errors(&p, length, &cfg);
        // the library's own phasor solver agrees with the oracle to rounding
        assert!(phasor_err <= 1e-9, "case {case}: phasor error {phasor_err:e}");
        assert!(sim_err <= 1e-3, "case {case}: relative RMS error {sim_err:e}");
    }
}

#[test]
fn conservation_holds_at_every_step() {
    let p = params(100.0);
    let mut cfg = SimConfig::new(SourceSpec::default(), build_feeder(&p, 600.0, 100.0).unwrap(), 0.4);
    cfg.loads = vec![LoadElement::heater(Phase::A), LoadElement::light(Phase::B), LoadElement::heater(Phase::C).switched(0.1, Some(0.3))];
    let st = |stage, start, end| ScheduledStage { stage, start, end };
    let hif = FaultSpec::hif(
        Phase::B,
        4,
        HifStageSchedule(vec![
            st(HifStage::InitialSawtooth { peak: 0.5 }, 0.05, 0.1),
            st(HifStage::Sizzling { peak: 2.0 }, 0.1, 0.2),
            st(HifStage::NegativeHalfArc { arc: ArcParams::default(), ignition_probability: 0.7 }, 0.2, 0.3),
            st(HifStage::StableArc { arc: ArcParams::default() }, 0.3, 0.4),
        ]),
    );
    for fault in [None, Some(FaultSpec::lif(Phase::A, 6, 0.1, 6.0)), Some(hif)] {
        cfg.fault = fault;
        let (_, d) = simulate_with_diagnostics(&cfg, 3).unwrap();
        assert!(d.max_node_residual <= 1e-9, "node residual {:e}", d.max_node_residual);
        assert!(d.max_closure_residual <= 1e-9, "closure residual {:e}", d.max_closure_residual);
    }
}

#[test]
fn identical_seed_gives_identical_record() {
    let p = params(100.0);
    let mut cfg = SimConfig::new(SourceSpec::default(), build_feeder(&p, 300.0, 100.0).unwrap(), 0.3);
    cfg.loads = vec![LoadElement::heater(Phase::A)];
    cfg.fault = Some(FaultSpec::hif(
        Phase::C,
        2,
        HifStageSchedule::single(HifStage::NegativeHalfArc { arc: ArcParams::default(), ignition_probability: 0.5 }, 0.0, 0.3),
    ));
    let a = simulate(&cfg, 42).unwrap();
    let b = simulate(&cfg, 42).unwrap();
    assert_eq!(a, b);
    let c = simulate(&cfg, 43).unwrap();
    assert_ne!(a.channel("I_F").unwrap(), c.channel("I_F").unwrap());
}

#[test]
fn halving_the_step_barely_moves_steady_state_rms() {
    let p = params(100.0);
    let base = |rate: f64| {
        let mut cfg = SimConfig::new(SourceSpec::default(), build_feeder(&p, 600.0, 100.0).unwrap(), 0.2);
        cfg.sample_interval = 1.0 / rate;
        cfg.loads = vec![LoadElement::heater(Phase::A), LoadElement::light(Phase::B), LoadElement::resistive(Phase::C, 40.0)];
        cfg.fault = Some(FaultSpec::lif(Phase::B, 3, 0.0, 8.0));
        let rec = simulate(&cfg, 0).unwrap();
        let cycles = (rate / 50.0).round() as usize * 5;
        (0..rec.channel_count())
            .map(|c| rms(&rec.data(c)[rec.len() - cycles..]))
            .collect::<Vec<_>>()
    };
    let coarse = base(27_700.0);
    let fine = base(55_400.0);
    for (k, (a, b)) in coarse.iter().zip(&fine).enumerate() {
        if *b > 1e-3 {
            assert!((a - b).abs() / b < 5e-4, "channel {k}: {a} vs {b}");
        }
    }
}

#[test]
fn switching_a_load_steps_only_its_phase() {
    let p = params(100.0);
    let mut cfg = SimConfig::new(SourceSpec::default(), build_feeder(&p, 600.0, 100.0).unwrap(), 0.4);
    cfg.loads = Phase::ALL.map(LoadElement::heater).to_vec();
    cfg.loads.push(LoadElement::heater(Phase::B).switched(0.2, None));
    let rec = simulate(&cfg, 0).unwrap();
    let cycle = |name: &str, t: f64| {
        let k = (t * 27_700.0) as usize;
        rms(&rec.channel(name).unwrap()[k..k + 554])
    };
    let before_b = cycle("I_B", 0.1);
    let after_b = cycle("I_B", 0.3);
    assert!(after_b > 1.8 * before_b, "{before_b} -> {after_b}");
    for ph in ["I_A", "I_C"] {
        let (b, a) = (cycle(ph, 0.1), cycle(ph, 0.3));
        assert!((a - b).abs() / b < 0.02, "{ph}: {b} -> {a}");
    }
}

#[test]
fn lif_presets_land_in_the_reported_current_range() {
    let src = SourceSpec::default();
    let p = params(100.0);
    for target in [26.0, 36.0, 46.0] {
        let r = lif_limiting_resistance(target, &src).unwrap();
        let mut cfg = SimConfig::new(src, build_feeder(&p, 600.0, 100.0).unwrap(), 0.2);
        cfg.fault = Some(FaultSpec::lif(Phase::A, 6, 0.0, r));
        let rec = simulate(&cfg, 0).unwrap();
        let i = rms(&rec.channel("I_F").unwrap()[rec.len() - 2770..]);
        assert!(i <= target && i > 0.9 * target, "target {target}: {i}");
    }
}

#[test]
fn unloaded_feeder_draws_only_charging_current() {
    let p = params(100.0);
    let cfg = SimConfig::new(SourceSpec::default(), build_feeder(&p, 600.0, 100.0).unwrap(), 0.2);
    let rec = simulate(&cfg, 1).unwrap();
    for ch in ["I_A", "I_B", "I_C", "I_N", "I_F"] {
        let i = rec.channel(ch).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(i < 1e-3, "{ch}: {i} A");
    }
    assert!(rec.channel("I_F").unwrap().iter().all(|v| *v == 0.0));
}
