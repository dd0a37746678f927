//! Fault branch models: the low-impedance fault resistor and the four staged
//! tree-branch HIF behaviours (saw-tooth, sizzling, negative-half-cycle
//! arcing, stable arcing).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder_sim::{Phase, SourceSpec};
use crate::waveform::{ChannelInfo, ChannelRole, WaveformRecord};

/// Leakage conductance of a non-ignited arc gap (1 MOhm).
pub const LEAKAGE_CONDUCTANCE: f64 = 1.0e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcParams {
    /// Positive arc threshold voltage, V.
    #[serde(default = "ArcParams::default_threshold")]
    pub vp: f64,
    /// Negative arc threshold voltage (magnitude), V.
    #[serde(default = "ArcParams::default_threshold")]
    pub vn: f64,
    #[serde(default = "ArcParams::default_resistance")]
    pub rp: f64,
    #[serde(default = "ArcParams::default_resistance")]
    pub rn: f64,
    /// Per-half-cycle relative threshold jitter.
    #[serde(default = "ArcParams::default_jitter")]
    pub jitter: f64,
}

impl ArcParams {
    fn default_threshold() -> f64 {
        80.0
    }
    fn default_resistance() -> f64 {
        40.0
    }
    fn default_jitter() -> f64 {
        0.1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vp >= 0.0 && self.vn >= 0.0) {
            return Err(Error::param("arc.vp/vn", "thresholds must be >= 0"));
        }
        if !(self.rp > 0.0 && self.rn > 0.0) {
            return Err(Error::param("arc.rp/rn", "arc resistances must be > 0"));
        }
        if !(0.0..=0.5).contains(&self.jitter) {
            return Err(Error::param("arc.jitter", format!("must be in [0, 0.5], got {}", self.jitter)));
        }
        Ok(())
    }
}

impl Default for ArcParams {
    fn default() -> Self {
        Self {
            vp: 80.0,
            vn: 80.0,
            rp: 40.0,
            rn: 40.0,
            jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case", deny_unknown_fields)]
pub enum HifStage {
    InitialSawtooth {
        #[serde(default = "default_sawtooth_peak")]
        peak: f64,
    },
    Sizzling {
        #[serde(default = "default_sizzling_peak")]
        peak: f64,
    },
    NegativeHalfArc {
        #[serde(default)]
        arc: ArcParams,
        #[serde(default = "default_ignition")]
        ignition_probability: f64,
    },
    StableArc {
        #[serde(default)]
        arc: ArcParams,
    },
}

fn default_sawtooth_peak() -> f64 {
    0.5
}
fn default_sizzling_peak() -> f64 {
    2.0
}
fn default_ignition() -> f64 {
    0.7
}

impl HifStage {
    pub fn name(&self) -> &'static str {
        match self {
            HifStage::InitialSawtooth { .. } => "initial_sawtooth",
            HifStage::Sizzling { .. } => "sizzling",
            HifStage::NegativeHalfArc { .. } => "negative_half_arc",
            HifStage::StableArc { .. } => "stable_arc",
        }
    }

    pub fn is_arcing(&self) -> bool {
        matches!(self, HifStage::NegativeHalfArc { .. } | HifStage::StableArc { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            HifStage::InitialSawtooth { peak } | HifStage::Sizzling { peak } => {
                if !(peak > 0.0 && peak.is_finite()) {
                    return Err(Error::param("peak", format!("must be > 0, got {peak}")));
                }
            }
            HifStage::NegativeHalfArc { arc, ignition_probability } => {
                arc.validate()?;
                if !(0.0..=1.0).contains(&ignition_probability) {
                    return Err(Error::param(
                        "ignition_probability",
                        format!("must be in [0, 1], got {ignition_probability}"),
                    ));
                }
            }
            HifStage::StableArc { arc } => arc.validate()?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledStage {
    #[serde(flatten)]
    pub stage: HifStage,
    pub start: f64,
    pub end: f64,
}

/// Ordered, non-overlapping HIF stage intervals (absolute times, s).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HifStageSchedule(pub Vec<ScheduledStage>);

impl HifStageSchedule {
    pub fn single(stage: HifStage, start: f64, end: f64) -> Self {
        Self(vec![ScheduledStage { stage, start, end }])
    }

    pub fn stages(&self) -> &[ScheduledStage] {
        &self.0
    }

    pub fn active(&self, t: f64) -> Option<(usize, &ScheduledStage)> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, s)| t >= s.start && t < s.end)
    }

    pub fn validate(&self, duration: Option<f64>) -> Result<()> {
        let mut prev_end = f64::NEG_INFINITY;
        for s in &self.0 {
            s.stage.validate()?;
            if !(s.end > s.start) || s.start < 0.0 {
                return Err(Error::param("stages", format!("bad interval [{}, {})", s.start, s.end)));
            }
            if s.start < prev_end {
                return Err(Error::param("stages", "stage intervals overlap or are out of order"));
            }
            if let Some(d) = duration {
                if s.start >= d {
                    return Err(Error::param("stages", format!("stage starts at {} s, after the {d} s run", s.start)));
                }
            }
            prev_end = s.end;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultKind {
    Lif { limiting_resistance: f64 },
    Hif { stages: HifStageSchedule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    #[serde(flatten)]
    pub kind: FaultKind,
    pub phase: Phase,
    /// Feeder node index (1 = end of the first section).
    pub node: usize,
    #[serde(default)]
    pub onset: f64,
}

impl FaultSpec {
    pub fn lif(phase: Phase, node: usize, onset: f64, limiting_resistance: f64) -> Self {
        Self {
            kind: FaultKind::Lif { limiting_resistance },
            phase,
            node,
            onset,
        }
    }

    pub fn hif(phase: Phase, node: usize, stages: HifStageSchedule) -> Self {
        let onset = stages.0.first().map_or(0.0, |s| s.start);
        Self {
            kind: FaultKind::Hif { stages },
            phase,
            node,
            onset,
        }
    }

    pub fn validate(&self, duration: Option<f64>) -> Result<()> {
        if !(self.onset >= 0.0) {
            return Err(Error::param("fault.onset", "must be >= 0"));
        }
        if let Some(d) = duration {
            if self.onset >= d {
                return Err(Error::param("fault.onset", format!("{} s is outside the {d} s run", self.onset)));
            }
        }
        match &self.kind {
            FaultKind::Lif { limiting_resistance } => {
                if !(*limiting_resistance > 0.0) {
                    return Err(Error::param("fault.limiting_resistance", "must be > 0"));
                }
            }
            FaultKind::Hif { stages } => {
                stages.validate(duration)?;
                if stages.0.first().is_some_and(|s| s.start < self.onset) {
                    return Err(Error::param("fault.stages", "first stage starts before the onset"));
                }
            }
        }
        Ok(())
    }

    /// True if the branch is a plain resistor at all times.
    pub fn is_linear(&self) -> bool {
        matches!(self.kind, FaultKind::Lif { .. })
    }
}

/// Resistance giving `target_rms` through a bolted phase-to-return path with
/// no feeder impedance.
pub fn lif_limiting_resistance(target_rms: f64, source: &SourceSpec) -> Result<f64> {
    if !(target_rms > 0.0) || !target_rms.is_finite() {
        return Err(Error::param("target_rms_current", format!("must be > 0, got {target_rms}")));
    }
    if target_rms > source.voltage_rms / 0.1 {
        return Err(Error::param(
            "target_rms_current",
            format!("{target_rms} A needs less than 0.1 ohm at {} V", source.voltage_rms),
        ));
    }
    Ok(source.voltage_rms / target_rms)
}

/// Piecewise-linear two-threshold conduction law, frozen for one half-cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcLaw {
    pub vp: f64,
    pub vn: f64,
    pub rp: f64,
    pub rn: f64,
    pub positive: bool,
    pub negative: bool,
    pub leakage: f64,
}

impl ArcLaw {
    pub fn resistor(r: f64) -> Self {
        Self {
            vp: 0.0,
            vn: 0.0,
            rp: r,
            rn: r,
            positive: true,
            negative: true,
            leakage: 0.0,
        }
    }

    /// Current and its voltage derivative at `v`.
    pub fn eval(&self, v: f64) -> (f64, f64) {
        let mut i = self.leakage * v;
        let mut g = self.leakage;
        if self.positive && v > self.vp {
            i += (v - self.vp) / self.rp;
            g += 1.0 / self.rp;
        } else if self.negative && v < -self.vn {
            i += (v + self.vn) / self.rn;
            g += 1.0 / self.rn;
        }
        (i, g)
    }
}

/// How the fault branch behaves at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchBehaviour {
    Open,
    /// Voltage-synchronised current injection, A.
    CurrentSource(f64),
    /// Voltage-dependent conduction.
    Law(ArcLaw),
}

impl BranchBehaviour {
    pub fn current(&self, v: f64) -> f64 {
        match self {
            BranchBehaviour::Open => 0.0,
            BranchBehaviour::CurrentSource(i) => *i,
            BranchBehaviour::Law(law) => law.eval(v).0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct HalfCycleDraw {
    index: i64,
    stage: usize,
    ignite: bool,
    jitter: f64,
}

/// Per-run fault branch state. Random draws are keyed by (seed, stage,
/// half-cycle) so repeated evaluations inside a step are consistent.
#[derive(Debug, Clone)]
pub struct FaultBranch {
    spec: FaultSpec,
    omega: f64,
    phase_angle: f64,
    seed: u64,
    cache: Option<HalfCycleDraw>,
}

impl FaultBranch {
    pub fn new(spec: FaultSpec, source: &SourceSpec, seed: u64) -> Self {
        Self {
            omega: 2.0 * PI * source.frequency,
            phase_angle: spec.phase.angle(),
            spec,
            seed,
            cache: None,
        }
    }

    pub fn spec(&self) -> &FaultSpec {
        &self.spec
    }

    fn angle(&self, t: f64) -> f64 {
        self.omega * t + self.phase_angle
    }

    fn draw(&mut self, stage: usize, index: i64) -> HalfCycleDraw {
        if let Some(d) = self.cache {
            if d.index == index && d.stage == stage {
                return d;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(index as u64);
        let u: f64 = rng.random();
        let jitter = rng.random_range(-1.0..=1.0);
        let p = match self.spec.kind {
            FaultKind::Hif { ref stages } => match stages.0[stage].stage {
                HifStage::NegativeHalfArc { ignition_probability, .. } => ignition_probability,
                _ => 1.0,
            },
            FaultKind::Lif { .. } => 1.0,
        };
        let d = HalfCycleDraw {
            index,
            stage,
            ignite: u < p,
            jitter,
        };
        self.cache = Some(d);
        d
    }

    /// Branch behaviour at time `t`.
    pub fn behaviour(&mut self, t: f64) -> BranchBehaviour {
        if t < self.spec.onset {
            return BranchBehaviour::Open;
        }
        let (index, stage) = match &self.spec.kind {
            FaultKind::Lif { limiting_resistance } => {
                return BranchBehaviour::Law(ArcLaw::resistor(*limiting_resistance));
            }
            FaultKind::Hif { stages } => match stages.active(t) {
                Some((i, s)) => (i, s.stage),
                None => return BranchBehaviour::Open,
            },
        };
        let theta = self.angle(t);
        match stage {
            HifStage::InitialSawtooth { peak } => {
                let frac = (theta / (2.0 * PI)).rem_euclid(1.0);
                BranchBehaviour::CurrentSource(peak * (1.0 - 2.0 * frac))
            }
            HifStage::Sizzling { peak } => BranchBehaviour::CurrentSource(peak * theta.sin().abs()),
            HifStage::NegativeHalfArc { arc, .. } => {
                let hc = (theta / PI).floor() as i64;
                let d = self.draw(index, hc);
                let negative_half = hc.rem_euclid(2) == 1;
                BranchBehaviour::Law(ArcLaw {
                    vp: arc.vp,
                    vn: arc.vn * (1.0 + arc.jitter * d.jitter),
                    rp: arc.rp,
                    rn: arc.rn,
                    positive: false,
                    negative: negative_half && d.ignite,
                    leakage: LEAKAGE_CONDUCTANCE,
                })
            }
            HifStage::StableArc { arc } => {
                let hc = (theta / PI).floor() as i64;
                let d = self.draw(index, hc);
                let scale = 1.0 + arc.jitter * d.jitter;
                BranchBehaviour::Law(ArcLaw {
                    vp: arc.vp * scale,
                    vn: arc.vn * scale,
                    rp: arc.rp,
                    rn: arc.rn,
                    positive: true,
                    negative: true,
                    leakage: 0.0,
                })
            }
        }
    }
}

/// One evaluation of the fault branch current at node voltage `v` and time `t`.
pub fn fault_branch_current(branch: &mut FaultBranch, v: f64, t: f64) -> f64 {
    branch.behaviour(t).current(v)
}

/// Renders the fault branch against the ideal source voltage of the faulted
/// phase, without any feeder. Channels: `I_F` (A) and `V_F` (V).
pub fn render_fault_current(
    spec: &FaultSpec,
    source: &SourceSpec,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<WaveformRecord> {
    source.validate()?;
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::param("duration/sample_rate", "must be > 0"));
    }
    spec.validate(None)?;
    let n = (duration * sample_rate).round() as usize;
    let mut branch = FaultBranch::new(spec.clone(), source, seed);
    let mut current = Vec::with_capacity(n);
    let mut voltage = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / sample_rate;
        let v = source.phase_voltage(spec.phase, t);
        voltage.push(v);
        current.push(fault_branch_current(&mut branch, v, t));
    }
    WaveformRecord::new(
        sample_rate,
        0.0,
        vec![
            ChannelInfo::new("I_F", "A", ChannelRole::FaultCurrent),
            ChannelInfo::new("V_F", "V", ChannelRole::NodeVoltage),
        ],
        vec![current, voltage],
    )
}
