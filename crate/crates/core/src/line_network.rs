//! Overhead-line parameters from conductor geometry (modified Carson
//! equations, potential coefficients) and the lumped pi-section feeder chain.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MU0: f64 = 4.0e-7 * PI;
pub const EPS0: f64 = 8.854_187_8128e-12;

pub const DEFAULT_FREQUENCY: f64 = 50.0;
pub const DEFAULT_EARTH_RESISTIVITY: f64 = 100.0;

/// Modified Carson constants: P = pi/8 and Q = -0.0386 + ln(2/k)/2.
const CARSON_P: f64 = PI / 8.0;
const CARSON_Q0: f64 = -0.038_60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConductorLabel {
    A,
    B,
    C,
    N,
}

impl ConductorLabel {
    pub const ALL: [ConductorLabel; 4] = [Self::A, Self::B, Self::C, Self::N];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
            Self::N => "N",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conductor {
    pub label: ConductorLabel,
    /// Horizontal position, m.
    pub x: f64,
    /// Height above ground, m.
    pub height: f64,
    /// Geometric mean radius, m.
    pub gmr: f64,
    /// Outer radius, m.
    pub radius: f64,
    /// AC resistance at system frequency, ohm/km.
    pub resistance: f64,
}

impl Conductor {
    fn distance(&self, other: &Conductor) -> f64 {
        (self.x - other.x).hypot(self.height - other.height)
    }

    fn image_distance(&self, other: &Conductor) -> f64 {
        (self.x - other.x).hypot(self.height + other.height)
    }
}

/// Four-wire overhead cross-section, stored in A, B, C, N order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Conductor>", into = "Vec<Conductor>")]
pub struct ConductorGeometry {
    conductors: [Conductor; 4],
}

impl ConductorGeometry {
    pub fn new(conductors: Vec<Conductor>) -> Result<Self> {
        if conductors.len() != 4 {
            return Err(Error::Geometry(format!(
                "expected 4 conductors, got {}",
                conductors.len()
            )));
        }
        for label in ConductorLabel::ALL {
            let n = conductors.iter().filter(|c| c.label == label).count();
            if n != 1 {
                return Err(Error::Geometry(format!(
                    "conductor {} appears {n} times",
                    label.as_str()
                )));
            }
        }
        validate_conductors(&conductors)?;
        let mut sorted = conductors;
        sorted.sort_by_key(|c| c.label);
        Ok(Self {
            conductors: [sorted[0], sorted[1], sorted[2], sorted[3]],
        })
    }

    pub fn conductors(&self) -> &[Conductor; 4] {
        &self.conductors
    }

    pub fn conductor(&self, label: ConductorLabel) -> &Conductor {
        &self.conductors[label.index()]
    }
}

impl Default for ConductorGeometry {
    /// Flat cross-arm: A/B/C at 0.0/0.4/0.8 m, neutral at 1.2 m, all 5.5 m
    /// above ground. Conductor data approximates a 7-strand ~60 mm2 aluminium
    /// conductor.
    fn default() -> Self {
        let mk = |label, x| Conductor {
            label,
            x,
            height: 5.5,
            gmr: 0.003_63,
            radius: 0.005,
            resistance: 0.45,
        };
        Self {
            conductors: [
                mk(ConductorLabel::A, 0.0),
                mk(ConductorLabel::B, 0.4),
                mk(ConductorLabel::C, 0.8),
                mk(ConductorLabel::N, 1.2),
            ],
        }
    }
}

impl TryFrom<Vec<Conductor>> for ConductorGeometry {
    type Error = Error;
    fn try_from(v: Vec<Conductor>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ConductorGeometry> for Vec<Conductor> {
    fn from(g: ConductorGeometry) -> Self {
        g.conductors.to_vec()
    }
}

fn validate_conductors(conductors: &[Conductor]) -> Result<()> {
    for c in conductors {
        let finite = [c.x, c.height, c.gmr, c.radius, c.resistance]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Geometry(format!("conductor {} has non-finite data", c.label.as_str())));
        }
        if c.height <= 0.0 {
            return Err(Error::Geometry(format!("conductor {} height must be > 0", c.label.as_str())));
        }
        if c.gmr <= 0.0 || c.radius <= 0.0 {
            return Err(Error::Geometry(format!("conductor {} radii must be > 0", c.label.as_str())));
        }
        if c.resistance < 0.0 {
            return Err(Error::Geometry(format!("conductor {} resistance must be >= 0", c.label.as_str())));
        }
    }
    for (i, a) in conductors.iter().enumerate() {
        for b in &conductors[i + 1..] {
            if a.distance(b) == 0.0 {
                return Err(Error::Geometry(format!(
                    "conductors {} and {} are coincident",
                    a.label.as_str(),
                    b.label.as_str()
                )));
            }
        }
    }
    Ok(())
}

/// Per-kilometre line constants at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct LineParameters {
    /// Series impedance, ohm/km.
    pub impedance: Matrix4<Complex64>,
    /// Maxwell capacitance matrix, nF/km.
    pub capacitance: Matrix4<f64>,
    pub frequency: f64,
    pub earth_resistivity: f64,
}

impl LineParameters {
    pub fn from_geometry(geom: &ConductorGeometry, frequency: f64, earth_resistivity: f64) -> Result<Self> {
        Ok(Self {
            impedance: carson_series_impedance(geom, frequency, earth_resistivity)?,
            capacitance: shunt_capacitance(geom)?,
            frequency,
            earth_resistivity,
        })
    }
}

/// Self and mutual impedances (ohm/km) for an arbitrary set of conductors.
pub fn carson_matrix(conductors: &[Conductor], frequency: f64, earth_resistivity: f64) -> Result<DMatrix<Complex64>> {
    if !(frequency > 0.0) {
        return Err(Error::param("frequency", format!("must be > 0, got {frequency}")));
    }
    if !(earth_resistivity > 0.0) {
        return Err(Error::param("earth_resistivity", format!("must be > 0, got {earth_resistivity}")));
    }
    validate_conductors(conductors)?;

    let omega = 2.0 * PI * frequency;
    let g = MU0 / (4.0 * PI);
    let k_per_m = (omega * MU0 / earth_resistivity).sqrt();
    let earth_r = 4.0 * omega * CARSON_P * g;
    let n = conductors.len();

    let z = DMatrix::from_fn(n, n, |i, j| {
        let (ci, cj) = (&conductors[i], &conductors[j]);
        let (s, d, r) = if i == j {
            (2.0 * ci.height, ci.gmr, ci.resistance / 1000.0)
        } else {
            (ci.image_distance(cj), ci.distance(cj), 0.0)
        };
        let q = CARSON_Q0 + 0.5 * (2.0 / (s * k_per_m)).ln();
        let per_m = Complex64::new(r + earth_r, 2.0 * omega * g * ((s / d).ln() + 2.0 * q));
        per_m * 1000.0
    });
    Ok(z)
}

/// Series impedance matrix (ohm/km) of the four-wire line, modified Carson form.
pub fn carson_series_impedance(
    geom: &ConductorGeometry,
    frequency: f64,
    earth_resistivity: f64,
) -> Result<Matrix4<Complex64>> {
    let z = carson_matrix(geom.conductors(), frequency, earth_resistivity)?;
    Ok(Matrix4::from_fn(|i, j| z[(i, j)]))
}

/// Maxwell capacitance matrix (nF/km) by inverting the potential coefficients.
pub fn capacitance_matrix(conductors: &[Conductor]) -> Result<DMatrix<f64>> {
    validate_conductors(conductors)?;
    let n = conductors.len();
    let scale = 1.0 / (2.0 * PI * EPS0);
    let p = DMatrix::from_fn(n, n, |i, j| {
        let (ci, cj) = (&conductors[i], &conductors[j]);
        if i == j {
            scale * (2.0 * ci.height / ci.radius).ln()
        } else {
            scale * (ci.image_distance(cj) / ci.distance(cj)).ln()
        }
    });
    let c = p
        .try_inverse()
        .ok_or_else(|| Error::Singular("potential coefficient matrix".into()))?;
    if c.iter().any(|v| !v.is_finite()) || (0..n).any(|i| c[(i, i)] <= 0.0) {
        return Err(Error::Singular("potential coefficient matrix is degenerate".into()));
    }
    // F/m -> nF/km
    let mut c = c * 1.0e12;
    let cs = (&c + c.transpose()) * 0.5;
    c.copy_from(&cs);
    Ok(c)
}

pub fn shunt_capacitance(geom: &ConductorGeometry) -> Result<Matrix4<f64>> {
    let c = capacitance_matrix(geom.conductors())?;
    Ok(Matrix4::from_fn(|i, j| c[(i, j)]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiSection {
    pub length: f64,
    /// Total series impedance of the section, ohm.
    pub series: Matrix4<Complex64>,
    /// Shunt capacitance lumped at each end, F (half the section total).
    pub shunt_half: Matrix4<f64>,
}

impl PiSection {
    pub fn resistance(&self) -> Matrix4<f64> {
        self.series.map(|z| z.re)
    }

    pub fn inductance(&self, frequency: f64) -> Matrix4<f64> {
        self.series.map(|z| z.im / (2.0 * PI * frequency))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeederTopology {
    pub sections: Vec<PiSection>,
    pub total_length: f64,
    pub step: f64,
    pub frequency: f64,
}

impl FeederTopology {
    /// Number of feeder nodes including the source node.
    pub fn node_count(&self) -> usize {
        self.sections.len() + 1
    }

    pub fn total_series(&self) -> Matrix4<Complex64> {
        self.sections
            .iter()
            .fold(Matrix4::zeros(), |acc, s| acc + s.series)
    }
}

/// Chains `total_length / step` identical pi-sections.
pub fn build_feeder(params: &LineParameters, total_length: f64, step: f64) -> Result<FeederTopology> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::param("step", format!("must be > 0, got {step}")));
    }
    if !(total_length > 0.0) || !total_length.is_finite() {
        return Err(Error::param("total_length", format!("must be > 0, got {total_length}")));
    }
    let ratio = total_length / step;
    let count = ratio.round();
    if count < 1.0 || (ratio - count).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::param(
            "total_length",
            format!("{total_length} m is not an integer multiple of the {step} m step"),
        ));
    }
    let count = count as usize;
    let km = step / 1000.0;
    let section = PiSection {
        length: step,
        series: params.impedance * Complex64::new(km, 0.0),
        // nF/km * km -> nF -> F, split over both ends
        shunt_half: params.capacitance * (km * 1e-9 * 0.5),
    };
    Ok(FeederTopology {
        sections: vec![section; count],
        total_length: step * count as f64,
        step,
        frequency: params.frequency,
    })
}
