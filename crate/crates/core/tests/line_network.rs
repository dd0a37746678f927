mod common;

use std::f64::consts::PI;

use common::{conductor, geometry_strategy};
use hif_core::line_network::{
    build_feeder, carson_matrix, carson_series_impedance, shunt_capacitance, Conductor, ConductorGeometry, ConductorLabel,
    LineParameters,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_geometry(rng: &mut ChaCha8Rng) -> ConductorGeometry {
    let mut x = rng.random_range(-1.0..1.0);
    let conductors = ConductorLabel::ALL
        .iter()
        .map(|&l| {
            x += rng.random_range(0.15..0.8);
            conductor(
                l,
                x,
                rng.random_range(4.0..12.0),
                rng.random_range(1e-3..1e-2),
                rng.random_range(0.1..1.2),
            )
        })
        .collect();
    ConductorGeometry::new(conductors).unwrap()
}

#[test]
fn carson_matches_independent_closed_form_on_random_geometries() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let geom = random_geometry(&mut rng);
        let f = rng.random_range(40.0..70.0);
        let rho = rng.random_range(10.0..1000.0);
        let z = carson_series_impedance(&geom, f, rho).unwrap();
        let o = common::oracle_impedance(geom.conductors(), f, rho);
        for i in 0..4 {
            for j in 0..4 {
                let rel = (z[(i, j)] - o[i][j]).norm() / o[i][j].norm();
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst <= 1e-9, "worst relative deviation {worst:e}");
}

#[test]
fn single_wire_capacitance_closed_form() {
    let eps0 = 8.854_187_8128e-12;
    let h = 7.0;
    let wire = conductor(ConductorLabel::A, 0.0, h, 0.004, 0.5);
    let c_wire = hif_core::line_network::capacitance_matrix(&[wire]).unwrap()[(0, 0)];
    // F/m to nF/km
    let expected = 2.0 * PI * eps0 / (2.0 * h / wire.radius).ln() * 1e12;
    assert!((c_wire - expected).abs() / expected < 1e-12, "{c_wire} vs {expected}");
}

#[test]
fn default_feeder_has_six_sections_and_additive_impedance() {
    let params = LineParameters::from_geometry(&ConductorGeometry::default(), 50.0, 100.0).unwrap();
    let feeder = build_feeder(&params, 600.0, 100.0).unwrap();
    assert_eq!(feeder.sections.len(), 6);
    let total = feeder.total_series();
    for i in 0..4 {
        for j in 0..4 {
            let want = params.impedance[(i, j)] * 0.6;
            assert!((total[(i, j)] - want).norm() <= 1e-12 * want.norm());
        }
    }
    assert_eq!(build_feeder(&params, 100.0, 100.0).unwrap().sections.len(), 1);
    assert!(build_feeder(&params, 650.0, 100.0).is_err());
    assert!(build_feeder(&params, 600.0, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parameter_matrices_are_symmetric((geom, f, rho) in geometry_strategy()) {
        let z = carson_series_impedance(&geom, f, rho).unwrap();
        let c = shunt_capacitance(&geom).unwrap();
        for i in 0..4 {
            prop_assert!(c[(i, i)] > 0.0);
            prop_assert!(z[(i, i)].im > 0.0);
            prop_assert!(z[(i, i)].re > geom.conductors()[i].resistance);
            for j in 0..4 {
                prop_assert!((z[(i, j)] - z[(j, i)]).norm() <= 1e-12 * z[(i, j)].norm());
                prop_assert!((c[(i, j)] - c[(j, i)]).abs() <= 1e-12 * c[(i, i)].abs());
            }
        }
    }

    #[test]
    fn mutual_impedance_falls_with_separation(
        x in -2.0f64..2.0,
        dx in 0.05f64..3.0,
        h1 in 3.0f64..12.0,
        h2 in 3.0f64..12.0,
        f in 30.0f64..70.0,
        rho in 5.0f64..2000.0,
    ) {
        let pair = |sep: f64| {
            let a = conductor(ConductorLabel::A, x, h1, 0.004, 0.4);
            let b = conductor(ConductorLabel::B, x + sep, h2, 0.004, 0.4);
            carson_matrix(&[a, b], f, rho).unwrap()[(0, 1)]
        };
        let (near, far) = (pair(dx), pair(2.0 * dx));
        prop_assert!(far.im < near.im);
        prop_assert!(far.norm() < near.norm());
    }

    #[test]
    fn raising_conductors_lowers_self_capacitance((geom, _f, _rho) in geometry_strategy(), lift in 0.5f64..5.0) {
        let raised: Vec<Conductor> = geom.conductors().iter().map(|c| Conductor { height: c.height + lift, ..*c }).collect();
        let c0 = shunt_capacitance(&geom).unwrap();
        let c1 = shunt_capacitance(&ConductorGeometry::new(raised).unwrap()).unwrap();
        for i in 0..4 {
            prop_assert!(c1[(i, i)] < c0[(i, i)]);
        }
    }

    #[test]
    fn feeder_is_linear_in_length(sections in 1usize..8, step in prop::sample::select(vec![25.0, 50.0, 100.0])) {
        let params = LineParameters::from_geometry(&ConductorGeometry::default(), 50.0, 100.0).unwrap();
        let l = sections as f64 * step;
        let one = build_feeder(&params, l, step).unwrap().total_series();
        let two = build_feeder(&params, 2.0 * l, step).unwrap().total_series();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((two[(i, j)] - one[(i, j)] * 2.0).norm() <= 1e-12 * two[(i, j)].norm());
            }
        }
    }
}
