//! Four-class fault detection: labelled corpus generation, classifier
//! training, window classification and evaluation.

mod classifier;
mod corpus;
mod dataset;
mod evaluate;

pub use classifier::{classify, train, ClassifierModel, FeatureSet, ModelKind, TrainConfig, TrainingMetadata};
pub use corpus::{Corpus, LabeledWindow, Provenance};
pub use dataset::{generate_dataset, label_windows, Scenario, ScenarioGrid, ScenarioPlan};
pub use evaluate::{evaluate, ConfusionMatrix, EvaluationReport, ReportedReference};

use serde::{Deserialize, Serialize};

use crate::current_inverse::{build_geometry_matrix, reconstruct, residual_current, DEFAULT_CONDITION_THRESHOLD};
use crate::error::{Error, Result};
use crate::fault_models::{FaultKind, FaultSpec};
use crate::feeder_sim::SourceSpec;
use crate::line_network::{ConductorGeometry, DEFAULT_EARTH_RESISTIVITY};
use crate::mag_sensing::{sensor_to_field, SensorHead, SensorModel, CURRENT_CHANNELS};
use crate::signal_features::{extract_features, make_windows, FeatureVector};
use crate::waveform::{ChannelInfo, ChannelRole, WaveformRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Normal,
    Lif,
    NonArcingHif,
    ArcingHif,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [Self::Normal, Self::Lif, Self::NonArcingHif, Self::ArcingHif];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Lif => "lif",
            Self::NonArcingHif => "non_arcing_hif",
            Self::ArcingHif => "arcing_hif",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s)
    }

    pub fn is_fault(self) -> bool {
        self != Self::Normal
    }

    /// Class of the fault branch state at time `t` (Normal when inactive).
    pub fn at_time(fault: Option<&FaultSpec>, t: f64) -> ClassLabel {
        let Some(f) = fault else { return Self::Normal };
        if t < f.onset {
            return Self::Normal;
        }
        match &f.kind {
            FaultKind::Lif { .. } => Self::Lif,
            FaultKind::Hif { stages } => match stages.active(t) {
                Some((_, s)) if s.stage.is_arcing() => Self::ArcingHif,
                Some(_) => Self::NonArcingHif,
                None => Self::Normal,
            },
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where window features come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// Residual and phase currents recovered by the geometry inverse.
    #[default]
    Reconstructed,
    /// Sensor axes in tesla, no inversion.
    RawSensor,
}

/// Residual (sum of the four conductors) current channel name.
pub const RESIDUAL_CHANNEL: &str = "I_R";

/// Everything needed to go from sensor outputs to feature vectors. Stored in
/// trained models so detection reproduces the training pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub geometry: ConductorGeometry,
    pub earth_resistivity: f64,
    pub source: SourceSpec,
    pub heads: Vec<SensorHead>,
    pub sensor: SensorModel,
    pub condition_threshold: f64,
    pub feature_source: FeatureSource,
    pub cycles_per_window: usize,
    pub overlap: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            geometry: ConductorGeometry::default(),
            earth_resistivity: DEFAULT_EARTH_RESISTIVITY,
            source: SourceSpec::default(),
            heads: SensorHead::default_pair(),
            sensor: SensorModel::default(),
            condition_threshold: DEFAULT_CONDITION_THRESHOLD,
            feature_source: FeatureSource::Reconstructed,
            cycles_per_window: 10,
            overlap: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn with_heads(&self, heads: Vec<SensorHead>) -> Self {
        Self {
            heads,
            ..self.clone()
        }
    }

    /// Names of the channels that feed the classifier.
    pub fn detection_channels(&self) -> Vec<String> {
        match self.feature_source {
            FeatureSource::Reconstructed => [RESIDUAL_CHANNEL, "I_A", "I_B", "I_C"].map(String::from).to_vec(),
            FeatureSource::RawSensor => self
                .heads
                .iter()
                .flat_map(|h| h.axes.iter().map(|&a| h.channel_name("B", a)))
                .collect(),
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let base = FeatureVector::names();
        self.detection_channels()
            .iter()
            .flat_map(|c| base.iter().map(move |f| format!("{c}.{f}")))
            .collect()
    }

    /// Converts a record holding sensor outputs (`S_*`), fields (`B_*`) or
    /// conductor currents (`I_A..I_N`) into the detection channels.
    pub fn detection_record(&self, record: &WaveformRecord) -> Result<WaveformRecord> {
        let has = |role| !record.channels_with_role(role).is_empty();
        let fields = if has(ChannelRole::SensorOutput) {
            Some(sensor_to_field(record, &self.sensor)?)
        } else if has(ChannelRole::FieldAxis) {
            Some(record.clone())
        } else {
            None
        };
        match self.feature_source {
            FeatureSource::RawSensor => {
                let fields = fields.ok_or_else(|| Error::MissingChannel("sensor or field channels".into()))?;
                let names = self.detection_channels();
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                fields.select(&refs)
            }
            FeatureSource::Reconstructed => {
                let currents = match fields {
                    Some(f) => {
                        let m = build_geometry_matrix(&self.geometry, &self.heads)?;
                        reconstruct(&f, &m, self.condition_threshold)?.currents
                    }
                    None => record.select(&CURRENT_CHANNELS)?,
                };
                let residual = residual_current(&currents)?;
                let res = WaveformRecord::new(
                    currents.sample_rate(),
                    currents.start_time(),
                    vec![ChannelInfo::new(RESIDUAL_CHANNEL, "A", ChannelRole::FaultCurrent)],
                    vec![residual],
                )?;
                res.merge(currents.select(&["I_A", "I_B", "I_C"])?)
            }
        }
    }

    /// Feature rows for every window of a detection record, with window start times.
    pub fn window_features(&self, detection: &WaveformRecord) -> Result<Vec<(f64, Vec<f64>)>> {
        let f0 = self.source.frequency;
        let channels = self.detection_channels();
        let mut per_channel = Vec::with_capacity(channels.len());
        for ch in &channels {
            per_channel.push(make_windows(detection, ch, f0, self.cycles_per_window, self.overlap)?);
        }
        let count = per_channel[0].len();
        (0..count)
            .map(|w| {
                let mut row = Vec::with_capacity(channels.len() * FeatureVector::LEN);
                for windows in &per_channel {
                    row.extend(extract_features(&windows[w])?.to_vec());
                }
                Ok((per_channel[0][w].start_time(), row))
            })
            .collect()
    }
}

/// One classified window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub start_time: f64,
    pub label: ClassLabel,
    pub scores: [f64; 4],
}

/// Batch detection over a whole record.
pub fn detect_record(model: &ClassifierModel, record: &WaveformRecord) -> Result<Vec<Detection>> {
    let pipeline = &model.pipeline;
    let det = pipeline.detection_record(record)?;
    pipeline
        .window_features(&det)?
        .into_iter()
        .map(|(start_time, row)| {
            let (label, scores) = classify(model, &row)?;
            Ok(Detection {
                start_time,
                label,
                scores,
            })
        })
        .collect()
}

/// Incremental detection over contiguous chunks. Windows are aligned to the
/// first sample after construction or the last [`StreamDetector::reset`], so
/// a gapless stream yields the same windows as [`detect_record`].
pub struct StreamDetector<'m> {
    model: &'m ClassifierModel,
    buffer: Option<WaveformRecord>,
}

impl<'m> StreamDetector<'m> {
    pub fn new(model: &'m ClassifierModel) -> Self {
        Self {
            model,
            buffer: None,
        }
    }

    /// Drops buffered samples; used after a gap in the stream.
    pub fn reset(&mut self) {
        self.buffer = None;
    }

    pub fn push(&mut self, chunk: &WaveformRecord) -> Result<Vec<Detection>> {
        let p = &self.model.pipeline;
        let det = p.detection_record(chunk)?;
        let mut buf = match self.buffer.take() {
            None => det,
            Some(prev) => concat(prev, det)?,
        };
        let (len, stride) = crate::signal_features::window_geometry(
            buf.sample_rate(),
            p.source.frequency,
            p.cycles_per_window,
            p.overlap,
        )?;
        let mut out = Vec::new();
        let mut start = 0;
        while start + len <= buf.len() {
            let w = buf.slice(start, len);
            let rows = p.window_features(&w)?;
            for (t, row) in rows {
                let (label, scores) = classify(self.model, &row)?;
                out.push(Detection {
                    start_time: t,
                    label,
                    scores,
                });
            }
            start += stride;
        }
        buf = buf.slice(start, buf.len() - start);
        self.buffer = Some(buf);
        Ok(out)
    }
}

fn concat(a: WaveformRecord, b: WaveformRecord) -> Result<WaveformRecord> {
    if a.sample_rate() != b.sample_rate() || a.channels() != b.channels() {
        return Err(Error::Mismatch("stream chunks changed layout".into()));
    }
    let (rate, start, channels, mut samples) = a.into_parts();
    for (dst, src) in samples.iter_mut().zip(b.samples()) {
        dst.extend_from_slice(src);
    }
    WaveformRecord::new(rate, start, channels, samples)
}
