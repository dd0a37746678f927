//! Versioned JSON run configuration shared by every CLI subcommand.
//!
//! Every section is optional and falls back to its defaults; unknown keys are
//! rejected and reported with their full path (`simulation.loads[1].phse`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault_detector::{PipelineConfig, ScenarioGrid, TrainConfig};
use crate::fault_models::FaultSpec;
use crate::feeder_sim::{InitialState, LoadElement, Phase, SimConfig, DEFAULT_SAMPLE_RATE};
use crate::line_network::{build_feeder, LineParameters};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub grid: ScenarioGrid,
    #[serde(default = "default_runs")]
    pub runs_per_class: usize,
    #[serde(default)]
    pub training: TrainConfig,
}

fn default_runs() -> usize {
    80
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            pipeline: PipelineConfig::default(),
            simulation: SimulationSection::default(),
            grid: ScenarioGrid::default(),
            runs_per_class: default_runs(),
            training: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub length_m: f64,
    pub step_m: f64,
    pub duration_s: f64,
    pub sample_rate: f64,
    pub loads: Vec<LoadElement>,
    pub fault: Option<FaultSpec>,
    pub initial_state: InitialState,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            length_m: 600.0,
            step_m: 100.0,
            duration_s: 1.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            loads: Phase::ALL.map(LoadElement::heater).to_vec(),
            fault: None,
            initial_state: InitialState::SteadyState,
        }
    }
}

impl SimulationSection {
    pub fn to_sim_config(&self, pipeline: &PipelineConfig) -> Result<SimConfig> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::param("sample_rate", "must be > 0"));
        }
        let params = LineParameters::from_geometry(&pipeline.geometry, pipeline.source.frequency, pipeline.earth_resistivity)?;
        let feeder = build_feeder(&params, self.length_m, self.step_m)?;
        let mut cfg = SimConfig::new(pipeline.source, feeder, self.duration_s);
        cfg.sample_interval = 1.0 / self.sample_rate;
        cfg.loads = self.loads.clone();
        cfg.fault = self.fault.clone();
        cfg.initial_state = self.initial_state;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config {
                path: if path.is_empty() { ".".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config {
                path: "version".into(),
                message: format!("unsupported config version {} (expected {CONFIG_VERSION})", cfg.version),
            });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}
