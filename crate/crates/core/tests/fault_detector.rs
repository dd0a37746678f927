use std::sync::OnceLock;

use hif_core::config::SimulationSection;
use hif_core::fault_detector::{
    classify, detect_record, evaluate, generate_dataset, train, ClassLabel, ClassifierModel, Corpus, FeatureSet,
    ModelKind, PipelineConfig, ScenarioGrid, StreamDetector, TrainConfig,
};
use hif_core::fault_models::FaultSpec;
use hif_core::feeder_sim::{simulate, Phase};
use hif_core::io::{read_corpus, write_corpus};
use hif_core::mag_sensing::{field_record, transduce};
use hif_core::WaveformRecord;

fn grid() -> ScenarioGrid {
    ScenarioGrid {
        lengths_m: vec![200.0, 400.0],
        head_offsets_m: vec![0.42, 0.8],
        ..ScenarioGrid::default()
    }
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| generate_dataset(&grid(), 5, 21, &PipelineConfig::default()).unwrap())
}

fn quick(kind: ModelKind, feature_set: FeatureSet) -> TrainConfig {
    TrainConfig {
        kind,
        feature_set,
        epochs: 60,
        seed: 4,
        ..TrainConfig::default()
    }
}

fn mlp() -> &'static ClassifierModel {
    static M: OnceLock<ClassifierModel> = OnceLock::new();
    M.get_or_init(|| train(corpus(), &PipelineConfig::default(), &quick(ModelKind::Mlp, FeatureSet::LogAmplitude)).unwrap())
}

/// Conductor currents for a 400 m feeder with a bolted-ish LIF from 0.4 s.
fn lif_currents() -> WaveformRecord {
    let pipeline = PipelineConfig::default();
    let sim = SimulationSection {
        length_m: 400.0,
        duration_s: 0.8,
        fault: Some(FaultSpec::lif(Phase::B, 2, 0.4, 7.0)),
        ..SimulationSection::default()
    };
    simulate(&sim.to_sim_config(&pipeline).unwrap(), 3).unwrap()
}

fn sensor_record(currents: &WaveformRecord) -> WaveformRecord {
    let p = PipelineConfig::default();
    let fields = field_record(currents, &p.geometry, &p.heads).unwrap();
    transduce(&fields, &p.sensor, 8).unwrap()
}

#[test]
fn small_grid_covers_every_class() {
    let c = corpus();
    let counts = c.class_counts();
    assert!(counts.iter().all(|&n| n > 0), "{counts:?}");
    assert!(c.len() > 100 && c.len() <= 4 * 5 * 9, "{}", c.len());
    assert_eq!(c.feature_names, PipelineConfig::default().feature_names());
    assert!(c.windows.iter().all(|w| w.features.iter().all(|v| v.is_finite())));
}

#[test]
fn five_runs_per_class_give_at_least_180_windows() {
    // 1.2 s runs hold 11 windows; one class transition drops at most 2
    let grid = ScenarioGrid {
        duration_s: 1.2,
        ..grid()
    };
    let c = generate_dataset(&grid, 5, 3, &PipelineConfig::default()).unwrap();
    assert!(c.len() >= 180, "{}", c.len());
    assert!(c.class_counts().iter().all(|&n| n > 0), "{:?}", c.class_counts());
    for id in 0..20 {
        let n = c.windows.iter().filter(|w| w.provenance.scenario == id).count();
        assert!(n >= 9, "scenario {id}: {n} windows");
    }
}

#[test]
fn same_seed_gives_byte_identical_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let again = generate_dataset(&grid(), 5, 21, &PipelineConfig::default()).unwrap();
    write_corpus(&a, corpus()).unwrap();
    write_corpus(&b, &again).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(corpus().content_hash(), again.content_hash());
    assert_eq!(&read_corpus(&a).unwrap(), corpus());
    let other = generate_dataset(&grid(), 1, 22, &PipelineConfig::default()).unwrap();
    assert_ne!(other.content_hash(), corpus().content_hash());
}

#[test]
fn relabeling_permutes_confusion() {
    let perm = [2, 0, 3, 1];
    let pipeline = PipelineConfig::default();
    let cfg = quick(ModelKind::NearestCentroid, FeatureSet::LogAmplitude);
    let base = evaluate(&train(corpus(), &pipeline, &cfg).unwrap(), corpus()).unwrap();
    let mut relabeled = corpus().clone();
    for w in &mut relabeled.windows {
        w.label = ClassLabel::from_index(perm[w.label.index()]).unwrap();
    }
    let moved = evaluate(&train(&relabeled, &pipeline, &cfg).unwrap(), &relabeled).unwrap();
    assert_eq!(moved.confusion, base.confusion.permuted(perm));
    assert_eq!(moved.accuracy, base.accuracy);
}

#[test]
fn scores_are_distributions_with_argmax_label() {
    let m = mlp();
    for w in &corpus().windows {
        let (label, s) = classify(m, &w.features).unwrap();
        assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        let best = (0..4).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(label.index(), best);
    }
}

#[test]
fn own_corpus_accuracy_not_below_validation() {
    let m = mlp();
    let report = evaluate(m, corpus()).unwrap();
    let acc = report.accuracy;
    assert!(acc >= m.metadata.validation_accuracy, "{acc} < {}", m.metadata.validation_accuracy);
}

#[test]
fn scale_invariant_features_ignore_amplitude() {
    let model = train(corpus(), &PipelineConfig::default(), &quick(ModelKind::Mlp, FeatureSet::ScaleInvariant)).unwrap();
    let currents = lif_currents();
    let base: Vec<ClassLabel> = detect_record(&model, &currents).unwrap().iter().map(|d| d.label).collect();
    assert!(!base.is_empty());
    for c in [0.25, 0.5, 2.0, 8.0] {
        let (rate, start, channels, samples) = currents.clone().into_parts();
        let scaled = WaveformRecord::new(
            rate,
            start,
            channels,
            samples.into_iter().map(|ch| ch.into_iter().map(|v| v * c).collect()).collect(),
        )
        .unwrap();
        let labels: Vec<ClassLabel> = detect_record(&model, &scaled).unwrap().iter().map(|d| d.label).collect();
        assert_eq!(labels, base, "scale {c}");
    }
}

#[test]
fn streaming_matches_batch() {
    let m = mlp();
    let rec = sensor_record(&lif_currents());
    let batch = detect_record(m, &rec).unwrap();
    assert!(batch.iter().any(|d| d.label == ClassLabel::Normal));
    assert!(batch.iter().any(|d| d.label.is_fault()));

    let mut stream = StreamDetector::new(m);
    let mut got = Vec::new();
    let mut at = 0;
    for (i, size) in [1000, 1, 4321, 2770, 554, 9000].iter().cycle().enumerate() {
        if at >= rec.len() {
            break;
        }
        let n = (*size).min(rec.len() - at);
        got.extend(stream.push(&rec.slice(at, n)).unwrap());
        at += n;
        assert!(i < 100);
    }
    assert_eq!(got.len(), batch.len());
    for (s, b) in got.iter().zip(&batch) {
        assert_eq!(s.label, b.label);
        assert!((s.start_time - b.start_time).abs() < 1e-9);
        for k in 0..4 {
            assert!((s.scores[k] - b.scores[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn model_file_reproduces_detections() {
    let m = mlp();
    let back = ClassifierModel::from_bytes(&m.to_bytes()).unwrap();
    let rec = sensor_record(&lif_currents());
    assert_eq!(detect_record(m, &rec).unwrap(), detect_record(&back, &rec).unwrap());
}
