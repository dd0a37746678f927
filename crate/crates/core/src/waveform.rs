//! Multichannel sampled time series shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a channel physically represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelRole {
    PhaseCurrent,
    NeutralCurrent,
    FaultCurrent,
    NodeVoltage,
    FieldAxis,
    SensorOutput,
}

impl ChannelRole {
    pub fn to_byte(self) -> u8 {
        match self {
            ChannelRole::PhaseCurrent => 0,
            ChannelRole::NeutralCurrent => 1,
            ChannelRole::FaultCurrent => 2,
            ChannelRole::NodeVoltage => 3,
            ChannelRole::FieldAxis => 4,
            ChannelRole::SensorOutput => 5,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0 => ChannelRole::PhaseCurrent,
            1 => ChannelRole::NeutralCurrent,
            2 => ChannelRole::FaultCurrent,
            3 => ChannelRole::NodeVoltage,
            4 => ChannelRole::FieldAxis,
            5 => ChannelRole::SensorOutput,
            _ => return None,
        })
    }

    /// Best guess from a channel name, used where the role is not stored (CSV).
    pub fn infer(name: &str) -> Self {
        match name {
            "I_A" | "I_B" | "I_C" => ChannelRole::PhaseCurrent,
            "I_N" => ChannelRole::NeutralCurrent,
            _ if name.starts_with("I_") => ChannelRole::FaultCurrent,
            _ if name.starts_with("V_") => ChannelRole::NodeVoltage,
            _ if name.starts_with("B_") => ChannelRole::FieldAxis,
            _ if name.starts_with("S_") => ChannelRole::SensorOutput,
            _ => ChannelRole::PhaseCurrent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub name: String,
    pub unit: String,
    pub role: ChannelRole,
}

impl ChannelInfo {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, role: ChannelRole) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            role,
        }
    }
}

/// Channel-major sampled waveforms with a common sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformRecord {
    sample_rate: f64,
    start_time: f64,
    channels: Vec<ChannelInfo>,
    samples: Vec<Vec<f64>>,
}

impl WaveformRecord {
    pub fn new(
        sample_rate: f64,
        start_time: f64,
        channels: Vec<ChannelInfo>,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::param("sample_rate", format!("must be positive, got {sample_rate}")));
        }
        if channels.len() != samples.len() {
            return Err(Error::Mismatch(format!(
                "{} channel descriptors for {} sample arrays",
                channels.len(),
                samples.len()
            )));
        }
        if let Some(first) = samples.first() {
            if samples.iter().any(|s| s.len() != first.len()) {
                return Err(Error::Mismatch("channels have unequal lengths".into()));
            }
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Mismatch(format!("duplicate channel name `{}`", c.name)));
            }
        }
        Ok(Self {
            sample_rate,
            start_time,
            channels,
            samples,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn channels(&self) -> &[ChannelInfo] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.channel_index(name)
            .map(|i| self.samples[i].as_slice())
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn data(&self, index: usize) -> &[f64] {
        &self.samples[index]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn into_parts(self) -> (f64, f64, Vec<ChannelInfo>, Vec<Vec<f64>>) {
        (self.sample_rate, self.start_time, self.channels, self.samples)
    }

    /// Channels whose role matches, in record order.
    pub fn channels_with_role(&self, role: ChannelRole) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sub-record with the named channels, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<WaveformRecord> {
        let mut channels = Vec::with_capacity(names.len());
        let mut samples = Vec::with_capacity(names.len());
        for name in names {
            let i = self
                .channel_index(name)
                .ok_or_else(|| Error::MissingChannel(name.to_string()))?;
            channels.push(self.channels[i].clone());
            samples.push(self.samples[i].clone());
        }
        WaveformRecord::new(self.sample_rate, self.start_time, channels, samples)
    }

    /// Appends the channels of `other`, which must share rate and length.
    pub fn merge(mut self, other: WaveformRecord) -> Result<WaveformRecord> {
        if other.sample_rate != self.sample_rate || other.len() != self.len() {
            return Err(Error::Mismatch("merge requires equal rate and length".into()));
        }
        let (_, _, ch, s) = other.into_parts();
        self.channels.extend(ch);
        self.samples.extend(s);
        WaveformRecord::new(self.sample_rate, self.start_time, self.channels, self.samples)
    }

    /// Samples `[start, start + len)` of every channel.
    pub fn slice(&self, start: usize, len: usize) -> WaveformRecord {
        let end = (start + len).min(self.len());
        let start = start.min(end);
        WaveformRecord {
            sample_rate: self.sample_rate,
            start_time: self.start_time + start as f64 / self.sample_rate,
            channels: self.channels.clone(),
            samples: self.samples.iter().map(|s| s[start..end].to_vec()).collect(),
        }
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(name: &str) -> ChannelInfo {
        ChannelInfo::new(name, "A", ChannelRole::PhaseCurrent)
    }

    #[test]
    fn rejects_unequal_lengths_and_duplicates() {
        assert!(WaveformRecord::new(1.0, 0.0, vec![ch("a"), ch("b")], vec![vec![1.0], vec![]]).is_err());
        assert!(WaveformRecord::new(1.0, 0.0, vec![ch("a"), ch("a")], vec![vec![], vec![]]).is_err());
        assert!(WaveformRecord::new(0.0, 0.0, vec![ch("a")], vec![vec![]]).is_err());
    }

    #[test]
    fn slice_shifts_start_time() {
        let r = WaveformRecord::new(10.0, 1.0, vec![ch("a")], vec![(0..10).map(f64::from).collect()]).unwrap();
        let s = r.slice(3, 4);
        assert_eq!(s.data(0), &[3.0, 4.0, 5.0, 6.0]);
        assert!((s.start_time() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn role_bytes_round_trip() {
        for b in 0..6u8 {
            assert_eq!(ChannelRole::from_byte(b).unwrap().to_byte(), b);
        }
        assert!(ChannelRole::from_byte(6).is_none());
    }
}
