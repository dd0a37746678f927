//! Non-contact current reconstruction: the linear geometry map from conductor
//! currents to sensor-axis flux densities, solved per sample by least squares
//! over a QR factorisation computed once.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::line_network::{Conductor, ConductorGeometry};
use crate::mag_sensing::{field_per_ampere, sensor_to_field, Axis, SensorHead, SensorModel, CURRENT_CHANNELS};
use crate::waveform::{ChannelInfo, ChannelRole, WaveformRecord};

pub const DEFAULT_CONDITION_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct GeometryMatrix {
    /// Rows: (head, axis) in declared order. Columns: conductors. T/A.
    pub matrix: DMatrix<f64>,
    pub rows: Vec<(String, Axis)>,
    pub columns: Vec<String>,
    /// Infinite when the matrix is rank deficient.
    pub condition: f64,
    q_t: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl GeometryMatrix {
    /// Geometry matrix for an arbitrary conductor set.
    pub fn from_conductors(conductors: &[Conductor], heads: &[SensorHead]) -> Result<Self> {
        let mut rows = Vec::new();
        let mut entries = Vec::new();
        for head in heads {
            if head.axes.is_empty() {
                return Err(Error::param("head.axes", format!("head `{}` has no axes", head.label)));
            }
            let per_amp = conductors
                .iter()
                .map(|c| field_per_ampere(c, head.x, head.height))
                .collect::<Result<Vec<_>>>()?;
            for &axis in &head.axes {
                rows.push((head.label.clone(), axis));
                entries.extend(per_amp.iter().map(|u| u.component(axis)));
            }
        }
        let n = conductors.len();
        let m = rows.len();
        if m < n {
            return Err(Error::param(
                "heads",
                format!("{m} measured axes cannot resolve {n} conductor currents"),
            ));
        }
        let matrix = DMatrix::from_row_slice(m, n, &entries);
        let sv = matrix.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        let condition = if smin <= smax * f64::EPSILON * m as f64 {
            f64::INFINITY
        } else {
            smax / smin
        };
        let qr = matrix.clone().qr();
        let q_t = qr.q().transpose();
        let r = qr.r();
        Ok(Self {
            matrix,
            rows,
            columns: conductors.iter().map(|c| format!("I_{}", c.label.as_str())).collect(),
            condition,
            q_t,
            r,
        })
    }

    pub fn row_names(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|(h, a)| format!("B_{h}_{}", a.as_str()))
            .collect()
    }

    /// Least-squares currents for one measurement vector.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = &self.q_t * b;
        self.r
            .solve_upper_triangular(&y)
            .unwrap_or_else(|| DVector::from_element(self.matrix.ncols(), f64::NAN))
    }
}

/// Builds the 4-column geometry matrix for the four-wire line.
pub fn build_geometry_matrix(geom: &ConductorGeometry, heads: &[SensorHead]) -> Result<GeometryMatrix> {
    for h in heads {
        h.validate(geom)?;
    }
    GeometryMatrix::from_conductors(geom.conductors(), heads)
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// `I_A..I_N` (or one channel per matrix column), A.
    pub currents: WaveformRecord,
    /// Per-sample residual norm, T.
    pub residuals: Vec<f64>,
    pub condition: f64,
}

/// Per-sample least-squares reconstruction from `B_<head>_<axis>` channels.
pub fn reconstruct(measured: &WaveformRecord, m: &GeometryMatrix, condition_threshold: f64) -> Result<ReconstructionResult> {
    if !(m.condition <= condition_threshold) {
        return Err(Error::IllConditioned {
            condition: m.condition,
            threshold: condition_threshold,
        });
    }
    let names = m.row_names();
    let inputs: Vec<&[f64]> = names.iter().map(|n| measured.channel(n)).collect::<Result<_>>()?;
    let len = measured.len();
    let cols = m.matrix.ncols();
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(len); cols];
    let mut residuals = Vec::with_capacity(len);
    let mut b = DVector::zeros(names.len());
    for k in 0..len {
        for (r, ch) in inputs.iter().enumerate() {
            b[r] = ch[k];
        }
        let x = m.solve(&b);
        let res = (&m.matrix * &x - &b).norm();
        residuals.push(res);
        for c in 0..cols {
            out[c].push(x[c]);
        }
    }
    let channels = m
        .columns
        .iter()
        .map(|name| {
            let role = if name == "I_N" {
                ChannelRole::NeutralCurrent
            } else {
                ChannelRole::PhaseCurrent
            };
            ChannelInfo::new(name.clone(), "A", role)
        })
        .collect();
    Ok(ReconstructionResult {
        currents: WaveformRecord::new(measured.sample_rate(), measured.start_time(), channels, out)?,
        residuals,
        condition: m.condition,
    })
}

/// Reconstruction from raw `S_*` sensor outputs: inverts the sensor model first.
pub fn reconstruct_from_sensors(
    sensors: &WaveformRecord,
    model: &SensorModel,
    m: &GeometryMatrix,
    condition_threshold: f64,
) -> Result<ReconstructionResult> {
    reconstruct(&sensor_to_field(sensors, model)?, m, condition_threshold)
}

/// Sum of the four reconstructed conductor currents: the current returning
/// outside the line (fault path plus shunt leakage).
pub fn residual_current(currents: &WaveformRecord) -> Result<Vec<f64>> {
    let chans: Vec<&[f64]> = CURRENT_CHANNELS
        .iter()
        .map(|n| currents.channel(n))
        .collect::<Result<_>>()?;
    Ok((0..currents.len()).map(|k| chans.iter().map(|c| c[k]).sum()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelError {
    pub channel: String,
    pub rms_error_pct: f64,
    pub max_abs_error: f64,
}

/// Per-channel `100 * ||x - x_hat|| / ||x||` and `max |x - x_hat|`, for every
/// channel of `estimated` that also appears in `truth`.
pub fn rms_error_report(truth: &WaveformRecord, estimated: &WaveformRecord) -> Result<Vec<ChannelError>> {
    if truth.sample_rate() != estimated.sample_rate() {
        return Err(Error::Mismatch(format!(
            "sample rates differ: {} vs {} Hz",
            truth.sample_rate(),
            estimated.sample_rate()
        )));
    }
    if truth.len() != estimated.len() {
        return Err(Error::Mismatch(format!(
            "lengths differ: {} vs {} samples",
            truth.len(),
            estimated.len()
        )));
    }
    let mut out = Vec::new();
    for (i, info) in estimated.channels().iter().enumerate() {
        let x = truth.channel(&info.name)?;
        let xh = estimated.data(i);
        let mut err2 = 0.0;
        let mut ref2 = 0.0;
        let mut max_abs: f64 = 0.0;
        for (a, b) in x.iter().zip(xh) {
            let e = a - b;
            err2 += e * e;
            ref2 += a * a;
            max_abs = max_abs.max(e.abs());
        }
        let pct = if err2 == 0.0 {
            0.0
        } else if ref2 == 0.0 {
            f64::INFINITY
        } else {
            100.0 * (err2 / ref2).sqrt()
        };
        out.push(ChannelError {
            channel: info.name.clone(),
            rms_error_pct: pct,
            max_abs_error: max_abs,
        });
    }
    Ok(out)
}
