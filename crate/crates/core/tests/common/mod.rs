//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

use hif_core::fault_models::{FaultKind, FaultSpec};
use hif_core::feeder_sim::{simulate, steady_state_phasor, LoadElement, Phase, SimConfig, SourceSpec};
use hif_core::line_network::{build_feeder, Conductor, ConductorGeometry, ConductorLabel, LineParameters};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Kersting's reduced form: the 2h terms cancel, leaving
/// z_ii = r + pi^2 f 1e-4 + j 4 pi f 1e-4 (ln(1/GMR) + ln 2 - 0.0772 - ln(w mu0 / rho) / 2)
/// in ohm/km, and the same with D_ij in place of GMR (and no r) for mutuals.
pub fn oracle_impedance(c: &[Conductor], f: f64, rho: f64) -> Vec<Vec<Complex64>> {
    let mu0 = 4e-7 * PI;
    let w = 2.0 * PI * f;
    let tail = 2f64.ln() - 0.0772 - 0.5 * (w * mu0 / rho).ln();
    let re = PI * PI * f * 1e-4;
    (0..c.len())
        .map(|i| {
            (0..c.len())
                .map(|j| {
                    if i == j {
                        Complex64::new(c[i].resistance + re, 4.0 * PI * f * 1e-4 * ((1.0 / c[i].gmr).ln() + tail))
                    } else {
                        let d = ((c[i].x - c[j].x).powi(2) + (c[i].height - c[j].height).powi(2)).sqrt();
                        Complex64::new(re, 4.0 * PI * f * 1e-4 * ((1.0 / d).ln() + tail))
                    }
                })
                .collect()
        })
        .collect()
}

pub struct Oracle {
    /// RMS phasors: section-1 currents A, B, C, N, fault current, monitored node voltage.
    pub channels: [Complex64; 6],
}

/// Phasor solution assembled from the per-km line parameters. All nodes
/// (source included) go into one admittance matrix; the source block is then
/// partitioned out.
pub fn phasor_oracle(params: &LineParameters, length: f64, step: f64, src: &SourceSpec, loads: &[LoadElement], fault: Option<&FaultSpec>) -> Oracle {
    let n = (length / step).round() as usize;
    let w = 2.0 * PI * src.frequency;
    let j = Complex64::new(0.0, 1.0);
    let km = step / 1000.0;
    let z = DMatrix::from_fn(4, 4, |a, b| params.impedance[(a, b)] * km);
    let ys = z.clone().try_inverse().unwrap();
    let yc = DMatrix::from_fn(4, 4, |a, b| j * w * params.capacitance[(a, b)] * 1e-12 * step / 2.0);
    let dim = 4 * (n + 1);
    let mut y = DMatrix::<Complex64>::zeros(dim, dim);
    for s in 0..n {
        for (p, q, sign) in [(s, s, 1.0), (s + 1, s + 1, 1.0), (s, s + 1, -1.0), (s + 1, s, -1.0)] {
            for a in 0..4 {
                for b in 0..4 {
                    y[(4 * p + a, 4 * q + b)] += ys[(a, b)] * sign;
                }
            }
        }
        for node in [s, s + 1] {
            for a in 0..4 {
                for b in 0..4 {
                    y[(4 * node + a, 4 * node + b)] += yc[(a, b)];
                }
            }
        }
    }
    let end = 4 * n;
    for l in loads {
        let g = 1.0 / Complex64::new(l.resistance, w * l.inductance);
        let (p, q) = (end + l.phase as usize, end + 3);
        y[(p, p)] += g;
        y[(q, q)] += g;
        y[(p, q)] -= g;
        y[(q, p)] -= g;
    }
    if let Some(f) = fault {
        let FaultKind::Lif { limiting_resistance } = f.kind else { panic!("oracle handles resistive faults only") };
        let k = 4 * f.node + f.phase as usize;
        y[(k, k)] += Complex64::new(1.0 / limiting_resistance, 0.0);
    }
    let v0 = DVector::from_vec(vec![
        Complex64::from_polar(src.voltage_rms, 0.0),
        Complex64::from_polar(src.voltage_rms, -2.0 * PI / 3.0),
        Complex64::from_polar(src.voltage_rms, 2.0 * PI / 3.0),
        Complex64::new(0.0, 0.0),
    ]);
    let m = dim - 4;
    let yuu = y.view((4, 4), (m, m)).into_owned();
    let yus = y.view((4, 0), (m, 4)).into_owned();
    let vu = yuu.lu().solve(&(-(yus * &v0))).unwrap();
    let v = |node: usize, c: usize| if node == 0 { v0[c] } else { vu[4 * (node - 1) + c] };
    let v1 = DVector::from_fn(4, |c, _| v0[c] - v(1, c));
    let i1 = &ys * v1;
    let (fault_i, mon) = match fault {
        Some(f) => {
            let FaultKind::Lif { limiting_resistance } = f.kind else { unreachable!() };
            let vf = v(f.node, f.phase as usize);
            (vf / limiting_resistance, vf)
        }
        None => (Complex64::new(0.0, 0.0), v(n, 0)),
    };
    Oracle {
        channels: [i1[0], i1[1], i1[2], i1[3], fault_i, mon],
    }
}

pub fn waveform(p: Complex64, w: f64, t: f64) -> f64 {
    SQRT_2 * (p * Complex64::from_polar(1.0, w * t)).im
}

/// Biot-Savart line integral along a straight segment, composite Simpson.
pub fn segment_integral(current: f64, half_length: f64, distance: f64) -> f64 {
    let n = 20_000;
    let h = 2.0 * half_length / n as f64;
    let f = |y: f64| distance / (distance * distance + y * y).powf(1.5);
    let mut acc = f(-half_length) + f(half_length);
    for i in 1..n {
        let y = -half_length + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(y);
    }
    (4.0e-7 * PI) * current / (4.0 * PI) * acc * h / 3.0
}

pub fn conductor(label: ConductorLabel, x: f64, height: f64, gmr: f64, resistance: f64) -> Conductor {
    Conductor {
        label,
        x,
        height,
        gmr,
        radius: gmr * 1.3,
        resistance,
    }
}

pub fn geometry_strategy() -> impl Strategy<Value = (ConductorGeometry, f64, f64)> {
    (
        -1.0f64..1.0,
        prop::array::uniform4((0.1f64..1.0, 3.0f64..12.0, 1e-3f64..1.5e-2, 0.05f64..2.0)),
        30.0f64..70.0,
        5.0f64..2000.0,
    )
        .prop_map(|(x0, cs, f, rho)| {
            let mut x = x0;
            let conductors = ConductorLabel::ALL
                .iter()
                .zip(cs)
                .map(|(&l, (dx, h, gmr, r))| {
                    x += dx;
                    conductor(l, x, h, gmr, r)
                })
                .collect();
            (ConductorGeometry::new(conductors).unwrap(), f, rho)
        })
}

/// Linear feeder with 1-4 random RL loads and, half the time, a resistive
/// fault at a random node. Returns the line parameters and length too.
pub fn random_linear_case(rng: &mut ChaCha8Rng) -> (LineParameters, f64, SimConfig) {
    let rho = rng.random_range(20.0..1000.0);
    let p = LineParameters::from_geometry(&ConductorGeometry::default(), 50.0, rho).unwrap();
    let length = 100.0 * rng.random_range(1..=6) as f64;
    let feeder = build_feeder(&p, length, 100.0).unwrap();
    let n = feeder.sections.len();
    let mut cfg = SimConfig::new(SourceSpec::default(), feeder, 0.3);
    for _ in 0..rng.random_range(1..=4) {
        cfg.loads.push(LoadElement {
            phase: Phase::ALL[rng.random_range(0..3)],
            resistance: rng.random_range(8.0..200.0),
            inductance: rng.random_range(0.0..20e-3),
            on: 0.0,
            off: None,
        });
    }
    if rng.random_bool(0.5) {
        let node = rng.random_range(1..=n);
        cfg.fault = Some(FaultSpec::lif(Phase::ALL[rng.random_range(0..3)], node, 0.0, rng.random_range(5.0..50.0)));
    }
    (p, length, cfg)
}

/// Worst relative disagreement of the library phasor solution and of the
/// simulated steady state (last 5 cycles) with [`phasor_oracle`].
pub fn oracle_errors(p: &LineParameters, length: f64, cfg: &SimConfig) -> (f64, f64) {
    let src = cfg.source;
    let oracle = phasor_oracle(p, length, 100.0, &src, &cfg.loads, cfg.fault.as_ref());
    let phase_rms = oracle.channels[..3].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let lib = steady_state_phasor(cfg).unwrap();
    let mut phasor_err = 0.0f64;
    for (k, o) in oracle.channels.iter().enumerate() {
        let scale = oracle.channels[..4].iter().map(|c| c.norm()).fold(o.norm(), f64::max);
        phasor_err = phasor_err.max((lib.phasors[k] - o).norm() / scale);
    }

    let rec = simulate(cfg, 1).unwrap();
    let rate = rec.sample_rate();
    let w = src.omega();
    let tail = 5 * (rate / src.frequency).round() as usize;
    let start = rec.len() - tail;
    let mut sim_err = 0.0f64;
    for (k, o) in oracle.channels.iter().enumerate() {
        let sq: f64 = rec.data(k)[start..]
            .iter()
            .enumerate()
            .map(|(i, v)| (v - waveform(*o, w, (start + i) as f64 / rate)).powi(2))
            .sum();
        // small channels (neutral under near-balance) are judged against the phase scale
        let scale = if k == 5 { o.norm() } else { o.norm().max(0.05 * phase_rms) };
        sim_err = sim_err.max((sq / tail as f64).sqrt() / scale);
    }
    (phasor_err, sim_err)
}
