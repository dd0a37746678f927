//! Time-domain simulation of the four-wire feeder: ideal three-phase source,
//! a chain of coupled pi-sections, switchable R-L loads at the far end and an
//! optional fault branch to the source neutral.
//!
//! Integration is trapezoidal with companion models. The fault branch is a
//! single one-port, so each step solves the linear network once and reduces
//! the fault to a scalar Thevenin problem `v = v_open - z * i` that is closed
//! with Newton's method.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector, Matrix4, Vector4, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault_models::{BranchBehaviour, FaultBranch, FaultKind, FaultSpec};
use crate::line_network::FeederTopology;
use crate::waveform::{ChannelInfo, ChannelRole, WaveformRecord};

pub const DEFAULT_SAMPLE_RATE: f64 = 27_700.0;

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-9;
const MAX_HALVINGS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Phase angle of the source voltage, A -> B -> C sequence.
    pub fn angle(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -2.0 * PI / 3.0,
            Phase::C => 2.0 * PI / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    /// Phase-to-neutral RMS voltage, V.
    #[serde(default = "SourceSpec::default_voltage")]
    pub voltage_rms: f64,
    #[serde(default = "SourceSpec::default_frequency")]
    pub frequency: f64,
}

impl SourceSpec {
    fn default_voltage() -> f64 {
        230.0
    }
    fn default_frequency() -> f64 {
        50.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voltage_rms > 0.0) {
            return Err(Error::param("source.voltage_rms", "must be > 0"));
        }
        if !(self.frequency > 0.0) {
            return Err(Error::param("source.frequency", "must be > 0"));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    pub fn phase_voltage(&self, phase: Phase, t: f64) -> f64 {
        SQRT_2 * self.voltage_rms * (self.omega() * t + phase.angle()).sin()
    }

    /// RMS phasor of a phase voltage, with `x(t) = sqrt(2) Im(X e^{jwt})`.
    pub fn phasor(&self, phase: Phase) -> Complex64 {
        Complex64::from_polar(self.voltage_rms, phase.angle())
    }
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            voltage_rms: 230.0,
            frequency: 50.0,
        }
    }
}

/// Series R-L load between one phase and neutral at the far end of the feeder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadElement {
    pub phase: Phase,
    /// ohm
    pub resistance: f64,
    /// H
    #[serde(default)]
    pub inductance: f64,
    #[serde(default)]
    pub on: f64,
    #[serde(default)]
    pub off: Option<f64>,
}

impl LoadElement {
    /// Heater preset (23 ohm, 1 mH). Not calibrated to any specific appliance.
    pub fn heater(phase: Phase) -> Self {
        Self {
            phase,
            resistance: 23.0,
            inductance: 1e-3,
            on: 0.0,
            off: None,
        }
    }

    /// Outdoor light preset (529 ohm, 50 mH).
    pub fn light(phase: Phase) -> Self {
        Self {
            phase,
            resistance: 529.0,
            inductance: 50e-3,
            on: 0.0,
            off: None,
        }
    }

    pub fn resistive(phase: Phase, resistance: f64) -> Self {
        Self {
            phase,
            resistance,
            inductance: 0.0,
            on: 0.0,
            off: None,
        }
    }

    pub fn switched(mut self, on: f64, off: Option<f64>) -> Self {
        self.on = on;
        self.off = off;
        self
    }

    pub fn is_on(&self, t: f64) -> bool {
        t >= self.on && self.off.is_none_or(|off| t < off)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resistance >= 0.0 && self.inductance >= 0.0) {
            return Err(Error::param("load", "resistance and inductance must be >= 0"));
        }
        if self.resistance == 0.0 && self.inductance == 0.0 {
            return Err(Error::param("load", "resistance and inductance cannot both be zero"));
        }
        if let Some(off) = self.off {
            if !(off > self.on) {
                return Err(Error::param("load.off", "switch-off must follow switch-on"));
            }
        }
        Ok(())
    }

    pub fn impedance(&self, omega: f64) -> Complex64 {
        Complex64::new(self.resistance, omega * self.inductance)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// All currents and voltages zero at t = 0.
    Zero,
    /// Linear AC steady state of the t = 0 network (HIF stages treated open).
    #[default]
    SteadyState,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub source: SourceSpec,
    pub feeder: FeederTopology,
    pub loads: Vec<LoadElement>,
    pub fault: Option<FaultSpec>,
    pub duration: f64,
    pub sample_interval: f64,
    pub initial_state: InitialState,
}

impl SimConfig {
    pub fn new(source: SourceSpec, feeder: FeederTopology, duration: f64) -> Self {
        Self {
            source,
            feeder,
            loads: Vec::new(),
            fault: None,
            duration,
            sample_interval: 1.0 / DEFAULT_SAMPLE_RATE,
            initial_state: InitialState::SteadyState,
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.sample_interval).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if !(self.duration > 0.0) {
            return Err(Error::param("duration", "must be > 0"));
        }
        let max_dt = 1.0 / (20.0 * self.source.frequency);
        if !(self.sample_interval > 0.0 && self.sample_interval <= max_dt) {
            return Err(Error::param(
                "sample_interval",
                format!("must be in (0, {max_dt}] for at least 20 samples per cycle"),
            ));
        }
        if self.feeder.sections.is_empty() {
            return Err(Error::param("feeder", "needs at least one section"));
        }
        for l in &self.loads {
            l.validate()?;
        }
        if let Some(f) = &self.fault {
            f.validate(Some(self.duration))?;
            if f.node == 0 || f.node > self.feeder.sections.len() {
                return Err(Error::param(
                    "fault.node",
                    format!("node {} is not a feeder node (1..={})", f.node, self.feeder.sections.len()),
                ));
            }
        }
        Ok(())
    }
}

/// Output channel names of [`simulate`], in order.
pub const SIM_CHANNELS: [&str; 6] = ["I_A", "I_B", "I_C", "I_N", "I_F", "V_F"];

fn sim_channels() -> Vec<ChannelInfo> {
    vec![
        ChannelInfo::new("I_A", "A", ChannelRole::PhaseCurrent),
        ChannelInfo::new("I_B", "A", ChannelRole::PhaseCurrent),
        ChannelInfo::new("I_C", "A", ChannelRole::PhaseCurrent),
        ChannelInfo::new("I_N", "A", ChannelRole::NeutralCurrent),
        ChannelInfo::new("I_F", "A", ChannelRole::FaultCurrent),
        ChannelInfo::new("V_F", "V", ChannelRole::NodeVoltage),
    ]
}

/// Worst-case conservation residuals over the run, relative to the largest
/// branch current at the same step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimDiagnostics {
    pub max_node_residual: f64,
    pub max_closure_residual: f64,
    pub halved_steps: usize,
    pub newton_iterations: usize,
}

struct Factor {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Column of the inverse at the fault node.
    fault_column: Option<DVector<f64>>,
    series_y: Vec<Matrix4<f64>>,
    series_k: Vec<Matrix4<f64>>,
    cap_g: Vec<Matrix4<f64>>,
    load_g: Vec<f64>,
    load_k: Vec<f64>,
}

/// Dynamic state: node voltages (source node included) and branch currents.
#[derive(Clone)]
struct State {
    v: Vec<Vector4<f64>>,
    series: Vec<Vector4<f64>>,
    cap: Vec<Vector4<f64>>,
    load_v: Vec<f64>,
    load_i: Vec<f64>,
    fault_i: f64,
}

struct Network<'a> {
    cfg: &'a SimConfig,
    r: Vec<Matrix4<f64>>,
    l: Vec<Matrix4<f64>>,
    /// Total capacitance lumped at each node, F.
    c: Vec<Matrix4<f64>>,
    fault_index: Option<usize>,
    factors: HashMap<(u64, u32), Factor>,
}

impl<'a> Network<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let f = cfg.feeder.frequency;
        let n = cfg.feeder.sections.len();
        let r = cfg.feeder.sections.iter().map(|s| s.resistance()).collect();
        let l = cfg.feeder.sections.iter().map(|s| s.inductance(f)).collect();
        let mut c = vec![Matrix4::zeros(); n + 1];
        for (s, sec) in cfg.feeder.sections.iter().enumerate() {
            c[s] += sec.shunt_half;
            c[s + 1] += sec.shunt_half;
        }
        let fault_index = cfg
            .fault
            .as_ref()
            .map(|f| 4 * (f.node - 1) + f.phase.index());
        Self {
            cfg,
            r,
            l,
            c,
            fault_index,
            factors: HashMap::new(),
        }
    }

    fn n(&self) -> usize {
        self.cfg.feeder.sections.len()
    }

    fn load_mask(&self, t: f64) -> u64 {
        self.cfg
            .loads
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_on(t))
            .fold(0u64, |m, (i, _)| m | (1 << i))
    }

    fn factor(&mut self, mask: u64, level: u32) -> Result<&Factor> {
        if !self.factors.contains_key(&(mask, level)) {
            let h = self.cfg.sample_interval / f64::from(1u32 << level);
            let f = self.build_factor(mask, h)?;
            self.factors.insert((mask, level), f);
        }
        Ok(&self.factors[&(mask, level)])
    }

    fn build_factor(&self, mask: u64, h: f64) -> Result<Factor> {
        let n = self.n();
        let dim = 4 * n;
        let mut g = DMatrix::<f64>::zeros(dim, dim);
        let mut series_y = Vec::with_capacity(n);
        let mut series_k = Vec::with_capacity(n);
        for s in 0..n {
            let a = self.r[s] + self.l[s] * (2.0 / h);
            let y = a
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("series impedance of section {}", s + 1)))?;
            series_k.push(self.l[s] * (2.0 / h) - self.r[s]);
            // section s joins node s (sending) and s + 1 (receiving)
            let recv = 4 * s;
            add_block(&mut g, recv, recv, &y);
            if s > 0 {
                let send = 4 * (s - 1);
                add_block(&mut g, send, send, &y);
                add_block(&mut g, send, recv, &(-y));
                add_block(&mut g, recv, send, &(-y));
            }
            series_y.push(y);
        }
        let cap_g: Vec<Matrix4<f64>> = self.c.iter().map(|c| c * (2.0 / h)).collect();
        for k in 1..=n {
            add_block(&mut g, 4 * (k - 1), 4 * (k - 1), &cap_g[k]);
        }
        let end = 4 * (n - 1);
        let mut load_g = Vec::with_capacity(self.cfg.loads.len());
        let mut load_k = Vec::with_capacity(self.cfg.loads.len());
        for (i, load) in self.cfg.loads.iter().enumerate() {
            let (gl, kl) = if load.inductance > 0.0 {
                let a = load.resistance + 2.0 * load.inductance / h;
                (1.0 / a, 2.0 * load.inductance / h - load.resistance)
            } else {
                (1.0 / load.resistance, 0.0)
            };
            load_g.push(gl);
            load_k.push(kl);
            if mask & (1 << i) != 0 {
                let p = end + load.phase.index();
                let nn = end + 3;
                g[(p, p)] += gl;
                g[(nn, nn)] += gl;
                g[(p, nn)] -= gl;
                g[(nn, p)] -= gl;
            }
        }
        let lu = g.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("nodal admittance matrix".into()));
        }
        let fault_column = match self.fault_index {
            Some(f) => {
                let mut e = DVector::zeros(dim);
                e[f] = 1.0;
                if !lu.solve_mut(&mut e) {
                    return Err(Error::Singular("nodal admittance matrix".into()));
                }
                Some(e)
            }
            None => None,
        };
        Ok(Factor {
            lu,
            fault_column,
            series_y,
            series_k,
            cap_g,
            load_g,
            load_k,
        })
    }
}

fn add_block(g: &mut DMatrix<f64>, r0: usize, c0: usize, m: &Matrix4<f64>) {
    for i in 0..4 {
        for j in 0..4 {
            g[(r0 + i, c0 + j)] += m[(i, j)];
        }
    }
}

fn source_vector(src: &SourceSpec, t: f64) -> Vector4<f64> {
    Vector4::new(
        src.phase_voltage(Phase::A, t),
        src.phase_voltage(Phase::B, t),
        src.phase_voltage(Phase::C, t),
        0.0,
    )
}

struct Stepper<'a> {
    net: Network<'a>,
    fault: Option<FaultBranch>,
    diag: SimDiagnostics,
    rhs: DVector<f64>,
    step_index: usize,
}

impl<'a> Stepper<'a> {
    /// Advances `state` from `t0` by one output interval, halving on Newton failure.
    fn advance(&mut self, state: &mut State, t0: f64, level: u32) -> Result<()> {
        let h = self.net.cfg.sample_interval / f64::from(1u32 << level);
        let snapshot = state.clone();
        match self.try_step(state, t0, h, level) {
            Ok(()) => Ok(()),
            Err(Error::NonConvergence { .. }) if level < MAX_HALVINGS => {
                *state = snapshot;
                self.diag.halved_steps += 1;
                self.advance(state, t0, level + 1)?;
                self.advance(state, t0 + h / 2.0, level + 1)
            }
            Err(e) => Err(e),
        }
    }

    fn try_step(&mut self, state: &mut State, t0: f64, h: f64, level: u32) -> Result<()> {
        let t1 = t0 + h;
        let n = self.net.n();
        let mask = self.net.load_mask(t1);
        let src = source_vector(&self.net.cfg.source, t1);
        let loads = &self.net.cfg.loads;
        let behaviour = match self.fault.as_mut() {
            Some(f) => f.behaviour(t1),
            None => BranchBehaviour::Open,
        };
        let step_index = self.step_index;
        let fault_index = self.net.fault_index;
        let factor = self.net.factor(mask, level)?;

        // History terms.
        let mut eta = Vec::with_capacity(n);
        for s in 0..n {
            let dv = state.v[s] - state.v[s + 1];
            eta.push(factor.series_y[s] * (dv + factor.series_k[s] * state.series[s]));
        }
        let zeta: Vec<Vector4<f64>> = (0..=n)
            .map(|k| factor.cap_g[k] * state.v[k] + state.cap[k])
            .collect();
        let mut lambda = vec![0.0; loads.len()];
        for (i, load) in loads.iter().enumerate() {
            // Loads are reset to zero history while switched off.
            if mask & (1 << i) != 0 && load.inductance > 0.0 {
                lambda[i] = factor.load_g[i] * (state.load_v[i] + factor.load_k[i] * state.load_i[i]);
            }
        }

        let rhs = &mut self.rhs;
        rhs.fill(0.0);
        for s in 0..n {
            let recv = 4 * s;
            for c in 0..4 {
                rhs[recv + c] += eta[s][c];
            }
            if s > 0 {
                let send = 4 * (s - 1);
                for c in 0..4 {
                    rhs[send + c] -= eta[s][c];
                }
            } else {
                let inj = factor.series_y[0] * src;
                for c in 0..4 {
                    rhs[c] += inj[c];
                }
            }
        }
        for k in 1..=n {
            for c in 0..4 {
                rhs[4 * (k - 1) + c] += zeta[k][c];
            }
        }
        let end = 4 * (n - 1);
        for (i, load) in loads.iter().enumerate() {
            if mask & (1 << i) != 0 {
                rhs[end + load.phase.index()] -= lambda[i];
                rhs[end + 3] += lambda[i];
            }
        }
        if !factor.lu.solve_mut(rhs) {
            return Err(Error::Singular("nodal admittance matrix".into()));
        }

        // Close the fault one-port.
        let mut fault_i = 0.0;
        if let (Some(fi), Some(z)) = (fault_index, factor.fault_column.as_ref()) {
            let v_open = rhs[fi];
            let z_ff = z[fi];
            fault_i = match behaviour {
                BranchBehaviour::Open => 0.0,
                BranchBehaviour::CurrentSource(i) => i,
                BranchBehaviour::Law(law) => {
                    let mut i = state.fault_i;
                    let mut converged = false;
                    for _ in 0..NEWTON_MAX_ITER {
                        self.diag.newton_iterations += 1;
                        let (f, g) = law.eval(v_open - z_ff * i);
                        let delta = (i - f) / (1.0 + g * z_ff);
                        i -= delta;
                        if delta.abs() <= NEWTON_TOL * i.abs().max(1e-6) {
                            converged = true;
                            break;
                        }
                    }
                    if !converged {
                        return Err(Error::NonConvergence { step: step_index, time: t1 });
                    }
                    i
                }
            };
            if fault_i != 0.0 {
                rhs.axpy(-fault_i, z, 1.0);
            }
        }

        // Update state.
        let mut v_new = Vec::with_capacity(n + 1);
        v_new.push(src);
        for k in 1..=n {
            v_new.push(Vector4::from_column_slice(&rhs.as_slice()[4 * (k - 1)..4 * k]));
        }
        for s in 0..n {
            state.series[s] = factor.series_y[s] * (v_new[s] - v_new[s + 1]) + eta[s];
        }
        for k in 0..=n {
            state.cap[k] = factor.cap_g[k] * v_new[k] - zeta[k];
        }
        for (i, load) in loads.iter().enumerate() {
            let vl = v_new[n][load.phase.index()] - v_new[n][3];
            if mask & (1 << i) != 0 {
                state.load_i[i] = factor.load_g[i] * vl + lambda[i];
                state.load_v[i] = vl;
            } else {
                state.load_i[i] = 0.0;
                state.load_v[i] = 0.0;
            }
        }
        state.v = v_new;
        state.fault_i = fault_i;

        self.check_conservation(state, mask);
        Ok(())
    }

    fn check_conservation(&mut self, state: &State, mask: u64) {
        let n = self.net.n();
        let mut scale = state.fault_i.abs();
        for s in &state.series {
            scale = scale.max(s.amax());
        }
        for c in &state.cap {
            scale = scale.max(c.amax());
        }
        for i in &state.load_i {
            scale = scale.max(i.abs());
        }
        if scale == 0.0 {
            return;
        }
        let fault = self.net.cfg.fault.as_ref();
        let mut worst: f64 = 0.0;
        for k in 1..=n {
            let mut leaving = -state.series[k - 1] + state.cap[k];
            if k < n {
                leaving += state.series[k];
            }
            if k == n {
                for (i, load) in self.net.cfg.loads.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        leaving[load.phase.index()] += state.load_i[i];
                        leaving[3] -= state.load_i[i];
                    }
                }
            }
            if let Some(f) = fault {
                if f.node == k {
                    leaving[f.phase.index()] += state.fault_i;
                }
            }
            worst = worst.max(leaving.amax());
        }
        let downstream_cap: f64 = state.cap[1..].iter().map(|c| c.sum()).sum();
        let closure = state.series[0].sum() - downstream_cap - state.fault_i;
        self.diag.max_node_residual = self.diag.max_node_residual.max(worst / scale);
        self.diag.max_closure_residual = self.diag.max_closure_residual.max(closure.abs() / scale);
    }
}

fn initial_state(cfg: &SimConfig) -> Result<State> {
    let n = cfg.feeder.sections.len();
    let mut st = State {
        v: vec![Vector4::zeros(); n + 1],
        series: vec![Vector4::zeros(); n],
        cap: vec![Vector4::zeros(); n + 1],
        load_v: vec![0.0; cfg.loads.len()],
        load_i: vec![0.0; cfg.loads.len()],
        fault_i: 0.0,
    };
    match cfg.initial_state {
        InitialState::Zero => {
            st.v[0] = source_vector(&cfg.source, 0.0);
        }
        InitialState::SteadyState => {
            let sol = solve_network(cfg, 0.0, FaultTreatment::OpenUnlessLinear)?;
            let inst = |x: Complex64| SQRT_2 * x.im;
            for k in 0..=n {
                st.v[k] = sol.v[k].map(inst);
                st.cap[k] = sol.cap[k].map(inst);
            }
            for s in 0..n {
                st.series[s] = sol.series[s].map(inst);
            }
            for (i, l) in cfg.loads.iter().enumerate() {
                if l.is_on(0.0) {
                    st.load_i[i] = inst(sol.load[i]);
                    st.load_v[i] = st.v[n][l.phase.index()] - st.v[n][3];
                }
            }
            st.fault_i = inst(sol.fault);
        }
    }
    Ok(st)
}

fn record_sample(out: &mut [Vec<f64>], st: &State, cfg: &SimConfig) {
    for c in 0..4 {
        out[c].push(st.series[0][c]);
    }
    out[4].push(st.fault_i);
    let (node, phase) = match &cfg.fault {
        Some(f) => (f.node, f.phase.index()),
        None => (cfg.feeder.sections.len(), 0),
    };
    out[5].push(st.v[node][phase]);
}

/// Runs the transient simulation. Channels: [`SIM_CHANNELS`].
pub fn simulate(config: &SimConfig, seed: u64) -> Result<WaveformRecord> {
    simulate_with_diagnostics(config, seed).map(|(r, _)| r)
}

pub fn simulate_with_diagnostics(config: &SimConfig, seed: u64) -> Result<(WaveformRecord, SimDiagnostics)> {
    config.validate()?;
    let n_samples = config.sample_count();
    let mut state = initial_state(config)?;
    let dim = 4 * config.feeder.sections.len();
    let mut stepper = Stepper {
        net: Network::new(config),
        fault: config
            .fault
            .as_ref()
            .map(|f| FaultBranch::new(f.clone(), &config.source, seed)),
        diag: SimDiagnostics::default(),
        rhs: DVector::zeros(dim),
        step_index: 0,
    };
    let mut out: Vec<Vec<f64>> = (0..SIM_CHANNELS.len())
        .map(|_| Vec::with_capacity(n_samples))
        .collect();
    if n_samples > 0 {
        record_sample(&mut out, &state, config);
    }
    for k in 1..n_samples {
        stepper.step_index = k;
        let t0 = (k - 1) as f64 * config.sample_interval;
        stepper.advance(&mut state, t0, 0)?;
        record_sample(&mut out, &state, config);
    }
    let record = WaveformRecord::new(1.0 / config.sample_interval, 0.0, sim_channels(), out)?;
    Ok((record, stepper.diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FaultTreatment {
    Reject,
    OpenUnlessLinear,
}

struct PhasorSolution {
    v: Vec<Vector4<Complex64>>,
    series: Vec<Vector4<Complex64>>,
    cap: Vec<Vector4<Complex64>>,
    load: Vec<Complex64>,
    fault: Complex64,
}

/// Steady-state RMS phasors of the simulation channels, keyed like [`SIM_CHANNELS`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorChannels {
    pub names: Vec<String>,
    pub phasors: Vec<Complex64>,
}

impl PhasorChannels {
    pub fn get(&self, name: &str) -> Option<Complex64> {
        self.names.iter().position(|n| n == name).map(|i| self.phasors[i])
    }
}

/// Exact linear AC solution with every load in its end-of-run state.
pub fn steady_state_phasor(config: &SimConfig) -> Result<PhasorChannels> {
    config.validate()?;
    let sol = solve_network(config, config.duration, FaultTreatment::Reject)?;
    let (node, phase) = match &config.fault {
        Some(f) => (f.node, f.phase.index()),
        None => (config.feeder.sections.len(), 0),
    };
    let s = sol.series[0];
    Ok(PhasorChannels {
        names: SIM_CHANNELS.iter().map(|s| s.to_string()).collect(),
        phasors: vec![s[0], s[1], s[2], s[3], sol.fault, sol.v[node][phase]],
    })
}

fn solve_network(cfg: &SimConfig, t: f64, treatment: FaultTreatment) -> Result<PhasorSolution> {
    let n = cfg.feeder.sections.len();
    let omega = cfg.source.omega();
    let j = Complex64::new(0.0, 1.0);
    let dim = 4 * n;
    let mut y = DMatrix::<Complex64>::zeros(dim, dim);
    let mut rhs = DVector::<Complex64>::zeros(dim);
    let v0 = Vector4::new(
        cfg.source.phasor(Phase::A),
        cfg.source.phasor(Phase::B),
        cfg.source.phasor(Phase::C),
        Complex64::new(0.0, 0.0),
    );
    let mut ys = Vec::with_capacity(n);
    for (s, sec) in cfg.feeder.sections.iter().enumerate() {
        let z = sec.series;
        let yz = z
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("series impedance of section {}", s + 1)))?;
        let recv = 4 * s;
        for a in 0..4 {
            for b in 0..4 {
                y[(recv + a, recv + b)] += yz[(a, b)];
                if s > 0 {
                    let send = 4 * (s - 1);
                    y[(send + a, send + b)] += yz[(a, b)];
                    y[(send + a, recv + b)] -= yz[(a, b)];
                    y[(recv + a, send + b)] -= yz[(a, b)];
                }
            }
        }
        ys.push(yz);
    }
    let inj = ys[0] * v0;
    for c in 0..4 {
        rhs[c] += inj[c];
    }
    let mut caps = vec![Matrix4::<f64>::zeros(); n + 1];
    for (s, sec) in cfg.feeder.sections.iter().enumerate() {
        caps[s] += sec.shunt_half;
        caps[s + 1] += sec.shunt_half;
    }
    for k in 1..=n {
        for a in 0..4 {
            for b in 0..4 {
                y[(4 * (k - 1) + a, 4 * (k - 1) + b)] += j * omega * caps[k][(a, b)];
            }
        }
    }
    let end = 4 * (n - 1);
    let mut load_y = vec![Complex64::new(0.0, 0.0); cfg.loads.len()];
    for (i, l) in cfg.loads.iter().enumerate() {
        if l.is_on(t) {
            let yl = 1.0 / l.impedance(omega);
            load_y[i] = yl;
            let p = end + l.phase.index();
            let nn = end + 3;
            y[(p, p)] += yl;
            y[(nn, nn)] += yl;
            y[(p, nn)] -= yl;
            y[(nn, p)] -= yl;
        }
    }
    let mut fault_y = None;
    if let Some(f) = &cfg.fault {
        match &f.kind {
            FaultKind::Lif { limiting_resistance } => {
                if f.onset <= t {
                    let idx = 4 * (f.node - 1) + f.phase.index();
                    let g = Complex64::new(1.0 / limiting_resistance, 0.0);
                    y[(idx, idx)] += g;
                    fault_y = Some((f.node, f.phase.index(), g));
                }
            }
            FaultKind::Hif { stages } => {
                if treatment == FaultTreatment::Reject && !stages.stages().is_empty() {
                    return Err(Error::param(
                        "fault",
                        "steady-state phasor solution needs linear elements; HIF stages are nonlinear",
                    ));
                }
            }
        }
    }
    let x = y
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("phasor admittance matrix".into()))?;
    let mut v = vec![v0];
    for k in 1..=n {
        v.push(Vector4::from_fn(|c, _| x[4 * (k - 1) + c]));
    }
    let series = (0..n).map(|s| ys[s] * (v[s] - v[s + 1])).collect();
    let cap = (0..=n)
        .map(|k| caps[k].map(|c| j * omega * c) * v[k])
        .collect();
    let load = cfg
        .loads
        .iter()
        .enumerate()
        .map(|(i, l)| load_y[i] * (v[n][l.phase.index()] - v[n][3]))
        .collect();
    let fault = fault_y.map_or(Complex64::new(0.0, 0.0), |(node, p, g)| g * v[node][p]);
    Ok(PhasorSolution {
        v,
        series,
        cap,
        load,
        fault,
    })
}
