use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassLabel, Corpus, LabeledWindow, PipelineConfig, Provenance};
use crate::error::{Error, Result};
use crate::fault_models::{ArcParams, FaultSpec, HifStage, HifStageSchedule, ScheduledStage};
use crate::feeder_sim::{simulate, LoadElement, Phase, SimConfig};
use crate::line_network::{build_feeder, LineParameters};
use crate::mag_sensing::{field_record, transduce, SensorHead};

/// Axes of the scenario sweep. Every class is run over the lengths and head
/// offsets in round-robin order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGrid {
    pub lengths_m: Vec<f64>,
    pub step_m: f64,
    /// Distance of the upper head below the conductor plane, m.
    pub head_offsets_m: Vec<f64>,
    pub head_spacing_m: f64,
    pub pole_x: f64,
    pub classes: Vec<ClassLabel>,
    pub duration_s: f64,
    pub sample_rate: f64,
    /// Minimum fraction of a window one class must cover to be labelled.
    pub coverage: f64,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        Self {
            lengths_m: vec![100.0, 200.0, 300.0, 400.0, 500.0, 600.0],
            step_m: 100.0,
            head_offsets_m: vec![0.42, 0.6, 0.8],
            head_spacing_m: 0.58,
            pole_x: 0.6,
            classes: ClassLabel::ALL.to_vec(),
            duration_s: 1.0,
            sample_rate: crate::feeder_sim::DEFAULT_SAMPLE_RATE,
            coverage: 0.8,
        }
    }
}

impl ScenarioGrid {
    pub fn validate(&self) -> Result<()> {
        for l in ClassLabel::ALL {
            if !self.classes.contains(&l) {
                return Err(Error::Dataset(format!("scenario grid is missing class `{l}`")));
            }
        }
        if self.lengths_m.is_empty() || self.head_offsets_m.is_empty() {
            return Err(Error::Dataset("scenario grid needs at least one length and head offset".into()));
        }
        if !(self.coverage > 0.5 && self.coverage <= 1.0) {
            return Err(Error::param("coverage", "must be in (0.5, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: usize,
    pub class: ClassLabel,
    pub length_m: f64,
    pub head_offset_m: f64,
    pub loads: Vec<LoadElement>,
    pub fault: Option<FaultSpec>,
    pub seed: u64,
}

pub struct ScenarioPlan;

fn scenario_seed(seed: u64, id: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ (id as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_phase(rng: &mut ChaCha8Rng) -> Phase {
    Phase::ALL[rng.random_range(0..3)]
}

fn random_arc(rng: &mut ChaCha8Rng) -> ArcParams {
    let v = rng.random_range(60.0..100.0);
    let r = rng.random_range(30.0..60.0);
    ArcParams {
        vp: v,
        vn: v,
        rp: r,
        rn: r,
        jitter: 0.1,
    }
}

impl ScenarioPlan {
    /// Deterministic scenario list: `runs_per_class` runs of each class.
    pub fn build(grid: &ScenarioGrid, runs_per_class: usize, seed: u64) -> Result<Vec<Scenario>> {
        grid.validate()?;
        if runs_per_class == 0 {
            return Err(Error::Dataset("runs per class must be >= 1".into()));
        }
        let mut out = Vec::new();
        for (ci, &class) in grid.classes.iter().enumerate() {
            for r in 0..runs_per_class {
                let id = ci * runs_per_class + r;
                let nl = grid.lengths_m.len();
                let length_m = grid.lengths_m[r % nl];
                let head_offset_m = grid.head_offsets_m[(r / nl) % grid.head_offsets_m.len()];
                let s = scenario_seed(seed, id);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let nodes = (length_m / grid.step_m).round() as usize;
                let loads = Self::loads(&mut rng, class, grid.duration_s);
                let fault = Self::fault(&mut rng, class, nodes, grid.duration_s);
                out.push(Scenario {
                    id,
                    class,
                    length_m,
                    head_offset_m,
                    loads,
                    fault,
                    seed: s,
                });
            }
        }
        Ok(out)
    }

    fn loads(rng: &mut ChaCha8Rng, class: ClassLabel, duration: f64) -> Vec<LoadElement> {
        let mut loads: Vec<LoadElement> = Phase::ALL
            .iter()
            .map(|&p| LoadElement {
                phase: p,
                resistance: rng.random_range(15.0..60.0),
                inductance: rng.random_range(0.0..3e-3),
                on: 0.0,
                off: None,
            })
            .collect();
        if rng.random_bool(0.5) {
            loads.push(LoadElement::light(random_phase(rng)));
        }
        let switching = if class == ClassLabel::Normal { 0.6 } else { 0.25 };
        if rng.random_bool(switching) {
            let t = rng.random_range(0.15..0.85) * duration;
            let heater = LoadElement::heater(random_phase(rng));
            loads.push(if rng.random_bool(0.5) {
                heater.switched(t, None)
            } else {
                heater.switched(0.0, Some(t))
            });
        }
        loads
    }

    fn fault(rng: &mut ChaCha8Rng, class: ClassLabel, nodes: usize, duration: f64) -> Option<FaultSpec> {
        let phase = random_phase(rng);
        let node = rng.random_range(1..=nodes);
        let onset = rng.random_range(0.0..0.3) * duration;
        let stage = |stage, start, end| ScheduledStage { stage, start, end };
        match class {
            ClassLabel::Normal => None,
            ClassLabel::Lif => {
                let target: f64 = rng.random_range(26.0..46.0);
                Some(FaultSpec::lif(phase, node, onset, 230.0 / target))
            }
            ClassLabel::NonArcingHif => {
                let saw = HifStage::InitialSawtooth {
                    peak: rng.random_range(0.3..1.0),
                };
                let sizzle = HifStage::Sizzling {
                    peak: rng.random_range(1.0..3.0),
                };
                let stages = match rng.random_range(0..3) {
                    0 => vec![stage(saw, onset, duration)],
                    1 => vec![stage(sizzle, onset, duration)],
                    _ => {
                        let split = rng.random_range(0.4..0.7) * duration;
                        vec![stage(saw, onset, split), stage(sizzle, split, duration)]
                    }
                };
                Some(FaultSpec::hif(phase, node, HifStageSchedule(stages)))
            }
            ClassLabel::ArcingHif => {
                let neg = HifStage::NegativeHalfArc {
                    arc: random_arc(rng),
                    ignition_probability: rng.random_range(0.5..0.9),
                };
                let stable = HifStage::StableArc { arc: random_arc(rng) };
                let stages = match rng.random_range(0..3) {
                    0 => vec![stage(neg, onset, duration)],
                    1 => vec![stage(stable, onset, duration)],
                    _ => {
                        let split = rng.random_range(0.4..0.7) * duration;
                        vec![stage(neg, onset, split), stage(stable, split, duration)]
                    }
                };
                Some(FaultSpec::hif(phase, node, HifStageSchedule(stages)))
            }
        }
    }
}

/// Labels windows by the class that covers at least `coverage` of their
/// samples; windows without such a class are dropped (`None`).
pub fn label_windows(
    starts: &[f64],
    window_len: usize,
    sample_rate: f64,
    fault: Option<&FaultSpec>,
    coverage: f64,
) -> Vec<Option<ClassLabel>> {
    starts
        .iter()
        .map(|&t0| {
            let mut counts = [0usize; 4];
            for k in 0..window_len {
                counts[ClassLabel::at_time(fault, t0 + k as f64 / sample_rate).index()] += 1;
            }
            let (best, &n) = counts.iter().enumerate().max_by_key(|(_, &n)| n).expect("4 classes");
            (n as f64 >= coverage * window_len as f64).then(|| ClassLabel::ALL[best])
        })
        .collect()
}

fn run_scenario(sc: &Scenario, grid: &ScenarioGrid, pipeline: &PipelineConfig) -> Result<Vec<LabeledWindow>> {
    let geom = &pipeline.geometry;
    let params = LineParameters::from_geometry(geom, pipeline.source.frequency, pipeline.earth_resistivity)?;
    let feeder = build_feeder(&params, sc.length_m, grid.step_m)?;
    let mut cfg = SimConfig::new(pipeline.source, feeder, grid.duration_s);
    cfg.sample_interval = 1.0 / grid.sample_rate;
    cfg.loads = sc.loads.clone();
    cfg.fault = sc.fault.clone();
    let currents = simulate(&cfg, sc.seed)?;

    let plane = geom.conductors().iter().map(|c| c.height).fold(f64::NEG_INFINITY, f64::max);
    let heads = SensorHead::vertical_pair(grid.pole_x, plane, sc.head_offset_m, grid.head_spacing_m);
    let fields = field_record(&currents, geom, &heads)?;
    let sensors = transduce(&fields, &pipeline.sensor, sc.seed.rotate_left(17))?;
    let local = pipeline.with_heads(heads);
    let det = local.detection_record(&sensors)?;
    let rows = local.window_features(&det)?;

    let (len, _) = crate::signal_features::window_geometry(
        grid.sample_rate,
        pipeline.source.frequency,
        pipeline.cycles_per_window,
        pipeline.overlap,
    )?;
    let starts: Vec<f64> = rows.iter().map(|(t, _)| *t).collect();
    let labels = label_windows(&starts, len, grid.sample_rate, sc.fault.as_ref(), grid.coverage);
    Ok(rows
        .into_iter()
        .zip(labels)
        .filter_map(|((t, features), label)| {
            label.map(|label| LabeledWindow {
                features,
                label,
                provenance: Provenance {
                    scenario: sc.id,
                    seed: sc.seed,
                    start_time: t,
                },
            })
        })
        .collect())
}

/// Simulates every planned scenario (in parallel), senses, reconstructs,
/// windows and labels. Output order follows scenario ids.
pub fn generate_dataset(grid: &ScenarioGrid, runs_per_class: usize, seed: u64, pipeline: &PipelineConfig) -> Result<Corpus> {
    let plan = ScenarioPlan::build(grid, runs_per_class, seed)?;
    let results: Vec<Result<Vec<LabeledWindow>>> = plan
        .par_iter()
        .map(|sc| {
            run_scenario(sc, grid, pipeline).map_err(|e| Error::Scenario {
                scenario: sc.id,
                source: Box::new(e),
            })
        })
        .collect();
    let mut corpus = Corpus::new(pipeline.feature_names());
    for r in results {
        corpus.windows.extend(r?);
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_is_deterministic_and_spans_grid() {
        let grid = ScenarioGrid::default();
        let a = ScenarioPlan::build(&grid, 18, 7).unwrap();
        let b = ScenarioPlan::build(&grid, 18, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 72);
        for class in ClassLabel::ALL {
            let runs: Vec<_> = a.iter().filter(|s| s.class == class).collect();
            for &l in &grid.lengths_m {
                for &o in &grid.head_offsets_m {
                    assert!(runs.iter().any(|s| s.length_m == l && s.head_offset_m == o));
                }
            }
        }
        for s in &a {
            let n = (s.length_m / 100.0).round() as usize;
            if let Some(f) = &s.fault {
                f.validate(Some(1.0)).unwrap();
                assert!(f.node >= 1 && f.node <= n);
            }
        }
    }

    #[test]
    fn grid_must_cover_all_classes() {
        let grid = ScenarioGrid {
            classes: vec![ClassLabel::Normal, ClassLabel::Lif],
            ..ScenarioGrid::default()
        };
        assert!(ScenarioPlan::build(&grid, 1, 0).is_err());
        assert!(ScenarioPlan::build(&ScenarioGrid::default(), 0, 0).is_err());
    }

    #[test]
    fn boundary_windows_are_dropped() {
        let lif = FaultSpec::lif(Phase::A, 1, 0.3, 5.0);
        let starts = [0.0, 0.25, 0.26, 0.3];
        let labels = label_windows(&starts, 1000, 10_000.0, Some(&lif), 0.8);
        assert_eq!(
            labels,
            vec![Some(ClassLabel::Normal), None, None, Some(ClassLabel::Lif)]
        );
        // 85% of the window after onset
        let l = label_windows(&[0.285], 1000, 10_000.0, Some(&lif), 0.8);
        assert_eq!(l, vec![Some(ClassLabel::Lif)]);
    }
}
