//! Forward magnetic model (infinite-line Biot-Savart superposition) and a
//! simple GMR transduction model.
//!
//! Frame: x horizontal transverse to the line, y along the line (current
//! direction), z vertical. Conductors are infinite lines parallel to y.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line_network::{Conductor, ConductorGeometry, MU0};
use crate::waveform::{ChannelInfo, ChannelRole, WaveformRecord};

/// Current channels consumed by the forward model, in conductor order.
pub const CURRENT_CHANNELS: [&str; 4] = ["I_A", "I_B", "I_C", "I_N"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorHead {
    pub label: String,
    /// Horizontal position, m (same frame as the conductors).
    pub x: f64,
    /// Height above ground, m.
    pub height: f64,
    pub axes: Vec<Axis>,
}

impl SensorHead {
    /// Two x/z heads on a vertical pole axis, `top` and `top + spacing`
    /// metres below the conductor plane.
    pub fn vertical_pair(pole_x: f64, plane_height: f64, top: f64, spacing: f64) -> Vec<SensorHead> {
        vec![
            SensorHead {
                label: "upper".into(),
                x: pole_x,
                height: plane_height - top,
                axes: vec![Axis::X, Axis::Z],
            },
            SensorHead {
                label: "lower".into(),
                x: pole_x,
                height: plane_height - top - spacing,
                axes: vec![Axis::X, Axis::Z],
            },
        ]
    }

    /// Heads at 0.42 m and 1.00 m below the default cross-arm, on its centre line.
    pub fn default_pair() -> Vec<SensorHead> {
        Self::vertical_pair(0.6, 5.5, 0.42, 0.58)
    }

    pub fn validate(&self, geom: &ConductorGeometry) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::param("head.axes", format!("head `{}` has no axes", self.label)));
        }
        for c in geom.conductors() {
            if (self.x - c.x).hypot(self.height - c.height) == 0.0 {
                return Err(Error::Geometry(format!(
                    "head `{}` coincides with conductor {}",
                    self.label,
                    c.label.as_str()
                )));
            }
        }
        Ok(())
    }

    pub fn channel_name(&self, prefix: &str, axis: Axis) -> String {
        format!("{prefix}_{}_{}", self.label, axis.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    /// V/T after bridge amplification.
    pub sensitivity: f64,
    /// White noise density, T/sqrt(Hz).
    pub noise_density: f64,
    /// T
    pub saturation: f64,
    /// V
    #[serde(default)]
    pub offset: f64,
}

impl Default for SensorModel {
    /// 10 mV/uT, +-1 mT range, 200 pT/sqrt(Hz).
    fn default() -> Self {
        Self {
            sensitivity: 1.0e4,
            noise_density: 200e-12,
            saturation: 1e-3,
            offset: 0.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sensitivity > 0.0) {
            return Err(Error::param("sensor.sensitivity", "must be > 0"));
        }
        if !(self.noise_density >= 0.0) {
            return Err(Error::param("sensor.noise_density", "must be >= 0"));
        }
        if !(self.saturation > 0.0) {
            return Err(Error::param("sensor.saturation", "must be > 0"));
        }
        Ok(())
    }

    /// Per-sample noise standard deviation in field units, T.
    pub fn noise_sigma(&self, sample_rate: f64) -> f64 {
        self.noise_density * (sample_rate / 2.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldSample {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldSample {
    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.bx,
            Axis::Y => self.by,
            Axis::Z => self.bz,
        }
    }

    pub fn magnitude(&self) -> f64 {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }
}

/// Flux density per ampere of one conductor at `(x, height)`.
pub fn field_per_ampere(conductor: &Conductor, x: f64, height: f64) -> Result<FieldSample> {
    let rx = x - conductor.x;
    let rz = height - conductor.height;
    let d2 = rx * rx + rz * rz;
    if d2 == 0.0 {
        return Err(Error::Geometry(format!(
            "field point lies on conductor {}",
            conductor.label.as_str()
        )));
    }
    // B = mu0 I / (2 pi d) * (y_hat x r_hat)
    let k = MU0 / (2.0 * PI * d2);
    Ok(FieldSample {
        bx: k * rz,
        by: 0.0,
        bz: -k * rx,
    })
}

/// Flux density at a point from the four conductor currents (A, B, C, N).
pub fn field_at_point(currents: [f64; 4], geom: &ConductorGeometry, x: f64, height: f64) -> Result<FieldSample> {
    let mut b = FieldSample::default();
    for (c, i) in geom.conductors().iter().zip(currents) {
        let u = field_per_ampere(c, x, height)?;
        b.bx += u.bx * i;
        b.bz += u.bz * i;
    }
    Ok(b)
}

/// Magnitude at the perpendicular bisector of a straight segment of length
/// `2 * half_length` at distance `distance`.
pub fn finite_segment_field(current: f64, half_length: f64, distance: f64) -> Result<f64> {
    if !(half_length > 0.0) || !(distance > 0.0) {
        return Err(Error::param("half_length/distance", "must be > 0"));
    }
    let sin_theta = half_length / half_length.hypot(distance);
    Ok(MU0 * current / (4.0 * PI * distance) * 2.0 * sin_theta)
}

/// Ratio of the finite-segment field to the infinite-line field.
pub fn finite_segment_ratio(half_length: f64, distance: f64) -> Result<f64> {
    let inf = MU0 / (2.0 * PI * distance);
    Ok(finite_segment_field(1.0, half_length, distance)? / inf)
}

/// Distance at which a segment of the given half-length supplies `fraction`
/// of the infinite-line field. Bisection on the monotone ratio.
pub fn distance_for_fraction(half_length: f64, fraction: f64) -> Result<f64> {
    if !(half_length > 0.0) {
        return Err(Error::param("half_length", "must be > 0"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param("fraction", "must be in (0, 1)"));
    }
    // ratio decreases with distance
    let (mut lo, mut hi) = (half_length * 1e-9, half_length);
    while finite_segment_ratio(half_length, hi)? > fraction {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if finite_segment_ratio(half_length, mid)? > fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Field-axis channels `B_<head>_<axis>` from a record holding `I_A..I_N`.
pub fn field_record(currents: &WaveformRecord, geom: &ConductorGeometry, heads: &[SensorHead]) -> Result<WaveformRecord> {
    let src: Vec<&[f64]> = CURRENT_CHANNELS
        .iter()
        .map(|n| currents.channel(n))
        .collect::<Result<_>>()?;
    let mut channels = Vec::new();
    let mut samples = Vec::new();
    for head in heads {
        head.validate(geom)?;
        let per_amp: Vec<FieldSample> = geom
            .conductors()
            .iter()
            .map(|c| field_per_ampere(c, head.x, head.height))
            .collect::<Result<_>>()?;
        for &axis in &head.axes {
            let w: Vec<f64> = per_amp.iter().map(|u| u.component(axis)).collect();
            let data = (0..currents.len())
                .map(|k| (0..4).map(|c| w[c] * src[c][k]).sum())
                .collect();
            channels.push(ChannelInfo::new(head.channel_name("B", axis), "T", ChannelRole::FieldAxis));
            samples.push(data);
        }
    }
    WaveformRecord::new(currents.sample_rate(), currents.start_time(), channels, samples)
}

/// Applies the sensor model to every field-axis channel, producing `S_*`
/// sensor-output channels in volts.
pub fn transduce(fields: &WaveformRecord, model: &SensorModel, seed: u64) -> Result<WaveformRecord> {
    model.validate()?;
    let sigma = model.noise_sigma(fields.sample_rate());
    let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::param("sensor.noise_density", e.to_string()))?;
    let mut channels = Vec::new();
    let mut samples = Vec::new();
    for (ci, info) in fields.channels().iter().enumerate() {
        if info.role != ChannelRole::FieldAxis {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64);
        let data = fields
            .data(ci)
            .iter()
            .map(|&b| {
                let n = if sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
                model.sensitivity * (b.clamp(-model.saturation, model.saturation) + n) + model.offset
            })
            .collect();
        let name = match info.name.strip_prefix("B_") {
            Some(rest) => format!("S_{rest}"),
            None => format!("S_{}", info.name),
        };
        channels.push(ChannelInfo::new(name, "V", ChannelRole::SensorOutput));
        samples.push(data);
    }
    WaveformRecord::new(fields.sample_rate(), fields.start_time(), channels, samples)
}

/// Inverts the sensor model: `(out - offset) / sensitivity`, back to `B_*` channels.
pub fn sensor_to_field(sensors: &WaveformRecord, model: &SensorModel) -> Result<WaveformRecord> {
    model.validate()?;
    let mut channels = Vec::new();
    let mut samples = Vec::new();
    for (ci, info) in sensors.channels().iter().enumerate() {
        if info.role != ChannelRole::SensorOutput {
            continue;
        }
        let name = match info.name.strip_prefix("S_") {
            Some(rest) => format!("B_{rest}"),
            None => format!("B_{}", info.name),
        };
        channels.push(ChannelInfo::new(name, "T", ChannelRole::FieldAxis));
        samples.push(
            sensors
                .data(ci)
                .iter()
                .map(|v| (v - model.offset) / model.sensitivity)
                .collect(),
        );
    }
    WaveformRecord::new(sensors.sample_rate(), sensors.start_time(), channels, samples)
}
