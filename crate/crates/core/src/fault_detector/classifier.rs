use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassLabel, ConfusionMatrix, Corpus, PipelineConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HIFM";
const FORMAT_VERSION: u8 = 1;

/// Feature columns whose value scales with signal amplitude.
const AMPLITUDE_FEATURES: [&str; 5] = ["rms", "dc", "envelope_mean", "envelope_std", "fundamental"];

fn is_amplitude(name: &str) -> bool {
    let base = name.rsplit('.').next().unwrap_or(name);
    AMPLITUDE_FEATURES.contains(&base) || (base.starts_with('h') && base[1..].parse::<u32>().is_ok())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Feed-forward network, tanh hidden layers, softmax output.
    #[default]
    Mlp,
    NearestCentroid,
}

/// Transform applied to raw feature rows before standardisation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// Amplitude columns are log-compressed with asinh(x / median|x|).
    #[default]
    LogAmplitude,
    /// Amplitude columns are divided by their channel's RMS, and each RMS by
    /// the largest channel RMS. Invariant to a common gain on all channels.
    ScaleInvariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub feature_set: FeatureSet,
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Free-form timestamp copied into the metadata; left out by default so
    /// that models are byte-reproducible.
    pub timestamp: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Mlp,
            feature_set: FeatureSet::LogAmplitude,
            hidden_layers: vec![32, 32],
            epochs: 150,
            batch_size: 32,
            learning_rate: 3e-3,
            weight_decay: 1e-4,
            validation_fraction: 0.2,
            seed: 0,
            timestamp: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kind == ModelKind::Mlp {
            if self.hidden_layers.iter().any(|&w| w == 0) {
                return Err(Error::param("hidden_layers", "widths must be >= 1"));
            }
            if self.epochs == 0 || self.batch_size == 0 {
                return Err(Error::param("epochs", "epochs and batch_size must be >= 1"));
            }
            if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
                return Err(Error::param("learning_rate", "must be positive"));
            }
            if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
                return Err(Error::param("weight_decay", "must be non-negative"));
            }
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::param("validation_fraction", "must be in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub kind: ModelKind,
    pub feature_set: FeatureSet,
    pub seed: u64,
    pub corpus_hash: String,
    pub timestamp: Option<String>,
    pub feature_names: Vec<String>,
    pub train_rows: usize,
    pub validation_rows: usize,
    /// Corpus row indices dropped for non-finite features.
    pub rejected_rows: Vec<usize>,
    pub validation_accuracy: f64,
    pub validation_confusion: ConfusionMatrix,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major, `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Mlp(Vec<Layer>),
    /// One centroid per class; absent classes are `None`.
    Centroids(Vec<Option<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub metadata: TrainingMetadata,
    pub pipeline: PipelineConfig,
    /// Per-column reference level for the log transform (1 elsewhere).
    reference: Vec<f64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    params: Params,
}

fn softmax(z: &[f64]) -> [f64; 4] {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    std::array::from_fn(|i| e[i] / s)
}

fn argmax(s: &[f64; 4]) -> usize {
    let mut best = 0;
    for i in 1..4 {
        if s[i] > s[best] {
            best = i;
        }
    }
    best
}

fn feature_transform(set: FeatureSet, names: &[String], reference: &[f64], row: &[f64]) -> Vec<f64> {
    match set {
        FeatureSet::LogAmplitude => row
            .iter()
            .zip(names)
            .zip(reference)
            .map(|((&x, n), &r)| if is_amplitude(n) { (x / r).asinh() } else { x })
            .collect(),
        FeatureSet::ScaleInvariant => {
            let channel = |n: &str| n.rsplit_once('.').map_or(String::new(), |(c, _)| c.to_string());
            let rms_of = |c: &str| {
                names
                    .iter()
                    .position(|n| channel(n) == c && n.ends_with(".rms"))
                    .map_or(0.0, |i| row[i])
            };
            let max_rms = names
                .iter()
                .enumerate()
                .filter(|(_, n)| n.ends_with(".rms"))
                .map(|(i, _)| row[i])
                .fold(0.0, f64::max);
            row.iter()
                .zip(names)
                .map(|(&x, n)| {
                    if !is_amplitude(n) {
                        return x;
                    }
                    let den = if n.ends_with(".rms") { max_rms } else { rms_of(&channel(n)) };
                    if den > 0.0 {
                        x / den
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

impl ClassifierModel {
    pub fn feature_names(&self) -> &[String] {
        &self.metadata.feature_names
    }

    /// Raw features to the standardised space the model operates in.
    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let n = self.metadata.feature_names.len();
        if raw.len() != n {
            return Err(Error::Mismatch(format!("model expects {n} features, got {}", raw.len())));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("features", format!("non-finite value in column `{}`", self.metadata.feature_names[i])));
        }
        let t = feature_transform(self.metadata.feature_set, &self.metadata.feature_names, &self.reference, raw);
        Ok(t.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect())
    }

    /// Class scores for an already normalised row.
    pub fn scores_normalized(&self, z: &[f64]) -> [f64; 4] {
        match &self.params {
            Params::Mlp(layers) => {
                let mut x = z.to_vec();
                let mut y = Vec::new();
                for (i, l) in layers.iter().enumerate() {
                    l.forward(&x, &mut y);
                    if i + 1 < layers.len() {
                        y.iter_mut().for_each(|v| *v = v.tanh());
                    }
                    std::mem::swap(&mut x, &mut y);
                }
                softmax(&x)
            }
            Params::Centroids(c) => {
                let dim = z.len().max(1) as f64;
                let logits: Vec<f64> = c
                    .iter()
                    .map(|c| match c {
                        Some(c) => -0.5 * c.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / dim,
                        None => f64::NEG_INFINITY,
                    })
                    .collect();
                softmax(&logits)
            }
        }
    }

    /// Serialises to the `HIFM` container: magic, version byte, u32 LE
    /// metadata length, JSON metadata, u32 LE blob length, f64 LE blob.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            metadata: self.metadata.clone(),
            pipeline: self.pipeline.clone(),
        };
        let json = serde_json::to_vec(&header).expect("metadata serialises");
        let blob = self.blob();
        let mut out = Vec::with_capacity(13 + json.len() + blob.len() * 8);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&((blob.len() * 8) as u32).to_le_bytes());
        for v in blob {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: String| Error::Format(m);
        if bytes.len() < 5 || &bytes[..4] != MAGIC {
            return Err(fmt("not a model file (bad magic, expected \"HIFM\")".into()));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(fmt(format!("unsupported model format version {} (expected {FORMAT_VERSION})", bytes[4])));
        }
        let mut pos = 5;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if bytes.len() < pos + n {
                return Err(fmt(format!("model file truncated in {what} at byte {pos}")));
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        let len = u32::from_le_bytes(take(4, "metadata length")?.try_into().unwrap()) as usize;
        let header: Header =
            serde_json::from_slice(take(len, "metadata")?).map_err(|e| fmt(format!("model metadata: {e}")))?;
        let blen = u32::from_le_bytes(take(4, "parameter length")?.try_into().unwrap()) as usize;
        if blen % 8 != 0 {
            return Err(fmt("parameter blob length is not a multiple of 8".into()));
        }
        let blob: Vec<f64> = take(blen, "parameters")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if pos != bytes.len() {
            return Err(fmt(format!("{} trailing bytes after model", bytes.len() - pos)));
        }
        Self::from_blob(header, &blob)
    }

    fn blob(&self) -> Vec<f64> {
        let mut b = Vec::new();
        b.extend(&self.reference);
        b.extend(&self.mean);
        b.extend(&self.scale);
        match &self.params {
            Params::Mlp(layers) => {
                b.push(layers.len() as f64);
                for l in layers {
                    b.push(l.inputs as f64);
                    b.push(l.outputs as f64);
                    b.extend(&l.weights);
                    b.extend(&l.bias);
                }
            }
            Params::Centroids(cs) => {
                for c in cs {
                    match c {
                        Some(c) => {
                            b.push(1.0);
                            b.extend(c);
                        }
                        None => b.push(0.0),
                    }
                }
            }
        }
        b
    }

    fn from_blob(header: Header, blob: &[f64]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("model parameters: {m}"));
        let n = header.metadata.feature_names.len();
        let mut it = blob.iter().copied();
        let mut take = |k: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = it.by_ref().take(k).collect();
            if v.len() == k {
                Ok(v)
            } else {
                Err(bad("truncated"))
            }
        };
        let reference = take(n)?;
        let mean = take(n)?;
        let scale = take(n)?;
        if reference.iter().chain(&mean).chain(&scale).any(|v| !v.is_finite())
            || scale.iter().chain(&reference).any(|&v| v <= 0.0)
        {
            return Err(bad("normalisation constants must be finite with positive scales"));
        }
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e7 {
                Ok(v as usize)
            } else {
                Err(bad("invalid size field"))
            }
        };
        let params = match header.metadata.kind {
            ModelKind::Mlp => {
                let nl = count(take(1)?[0])?;
                let mut layers = Vec::with_capacity(nl);
                let mut prev = n;
                for _ in 0..nl {
                    let d = take(2)?;
                    let (inputs, outputs) = (count(d[0])?, count(d[1])?);
                    if inputs != prev {
                        return Err(bad("layer sizes do not chain"));
                    }
                    let weights = take(inputs * outputs)?;
                    let bias = take(outputs)?;
                    layers.push(Layer {
                        inputs,
                        outputs,
                        weights,
                        bias,
                    });
                    prev = outputs;
                }
                if prev != 4 || nl == 0 {
                    return Err(bad("output layer must have 4 units"));
                }
                Params::Mlp(layers)
            }
            ModelKind::NearestCentroid => {
                let mut cs = Vec::with_capacity(4);
                for _ in 0..4 {
                    cs.push(match take(1)?[0] {
                        0.0 => None,
                        1.0 => Some(take(n)?),
                        _ => return Err(bad("invalid centroid flag")),
                    });
                }
                Params::Centroids(cs)
            }
        };
        if it.next().is_some() {
            return Err(bad("unexpected trailing values"));
        }
        Ok(Self {
            metadata: header.metadata,
            pipeline: header.pipeline,
            reference,
            mean,
            scale,
            params,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: TrainingMetadata,
    pipeline: PipelineConfig,
}

/// Label and per-class scores (summing to 1) for one raw feature row.
pub fn classify(model: &ClassifierModel, features: &[f64]) -> Result<(ClassLabel, [f64; 4])> {
    let z = model.normalize(features)?;
    let s = model.scores_normalized(&z);
    Ok((ClassLabel::ALL[argmax(&s)], s))
}

fn stratified_split(labels: &[ClassLabel], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut val) = (Vec::new(), Vec::new());
    // Each class shuffles with a stream keyed by its first row, not by its
    // label, so renaming classes leaves the split unchanged.
    let base = rng.next_u64();
    for class in ClassLabel::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let Some(&first) = idx.first() else { continue };
        let mut class_rng = ChaCha8Rng::seed_from_u64(base);
        class_rng.set_stream(first as u64);
        idx.shuffle(&mut class_rng);
        let nv = if idx.len() >= 2 {
            ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1)
        } else {
            0
        };
        val.extend_from_slice(&idx[..nv]);
        train.extend_from_slice(&idx[nv..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn median_abs(mut v: Vec<f64>) -> f64 {
    v.iter_mut().for_each(|x| *x = x.abs());
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        let (c1, c2) = (1.0 - B1.powi(self.t), 1.0 - B2.powi(self.t));
        for i in 0..p.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g[i] * g[i];
            p[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

fn train_mlp(x: &[Vec<f64>], y: &[ClassLabel], cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Vec<Layer> {
    let n_in = x[0].len();
    let mut sizes = vec![n_in];
    sizes.extend(&cfg.hidden_layers);
    sizes.push(4);
    let mut layers: Vec<Layer> = sizes
        .windows(2)
        .map(|w| {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            Layer {
                inputs: w[0],
                outputs: w[1],
                weights: (0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                bias: vec![0.0; w[1]],
            }
        })
        .collect();
    // one parameter vector per layer: weights followed by bias
    let mut opt: Vec<Adam> = layers
        .iter()
        .map(|l| {
            let k = l.weights.len() + l.bias.len();
            Adam {
                m: vec![0.0; k],
                v: vec![0.0; k],
                t: 0,
            }
        })
        .collect();
    let mut grads: Vec<Vec<f64>> = layers.iter().map(|l| vec![0.0; l.weights.len() + l.bias.len()]).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut acts: Vec<Vec<f64>> = vec![Vec::new(); layers.len() + 1];
    let mut delta = Vec::new();
    let mut next = Vec::new();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
            for &i in batch {
                acts[0].clone_from(&x[i]);
                for (k, l) in layers.iter().enumerate() {
                    let (lo, hi) = acts.split_at_mut(k + 1);
                    l.forward(&lo[k], &mut hi[0]);
                    if k + 1 < layers.len() {
                        hi[0].iter_mut().for_each(|v| *v = v.tanh());
                    }
                }
                let p = softmax(&acts[layers.len()]);
                delta.clear();
                delta.extend((0..4).map(|c| p[c] - f64::from(u8::from(c == y[i].index()))));
                for k in (0..layers.len()).rev() {
                    let l = &layers[k];
                    let a = &acts[k];
                    let g = &mut grads[k];
                    for o in 0..l.outputs {
                        let d = delta[o];
                        let row = &mut g[o * l.inputs..(o + 1) * l.inputs];
                        row.iter_mut().zip(a).for_each(|(gw, av)| *gw += d * av);
                        g[l.weights.len() + o] += d;
                    }
                    if k > 0 {
                        next.clear();
                        next.extend((0..l.inputs).map(|j| {
                            let s: f64 = (0..l.outputs).map(|o| l.weights[o * l.inputs + j] * delta[o]).sum();
                            s * (1.0 - a[j] * a[j])
                        }));
                        std::mem::swap(&mut delta, &mut next);
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for ((l, g), o) in layers.iter_mut().zip(&mut grads).zip(&mut opt) {
                let nw = l.weights.len();
                g.iter_mut().for_each(|v| *v *= scale);
                for (gw, w) in g[..nw].iter_mut().zip(&l.weights) {
                    *gw += cfg.weight_decay * w;
                }
                o.t += 1;
                let mut p: Vec<f64> = l.weights.iter().chain(&l.bias).copied().collect();
                o.step(&mut p, g, cfg.learning_rate);
                l.weights.copy_from_slice(&p[..nw]);
                l.bias.copy_from_slice(&p[nw..]);
            }
        }
    }
    layers
}

/// Fits a classifier on standardised features with a stratified split.
/// Rows with non-finite features are dropped and listed in the metadata.
pub fn train(corpus: &Corpus, pipeline: &PipelineConfig, cfg: &TrainConfig) -> Result<ClassifierModel> {
    cfg.validate()?;
    let names = &corpus.feature_names;
    if names.is_empty() {
        return Err(Error::Dataset("corpus has no feature columns".into()));
    }
    let mut rejected = Vec::new();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, w) in corpus.windows.iter().enumerate() {
        if w.features.len() != names.len() {
            return Err(Error::Mismatch(format!(
                "corpus row {i} has {} features, header has {}",
                w.features.len(),
                names.len()
            )));
        }
        if w.features.iter().all(|v| v.is_finite()) {
            rows.push(&w.features);
            labels.push(w.label);
        } else {
            rejected.push(i);
        }
    }
    let present: Vec<ClassLabel> = ClassLabel::ALL.into_iter().filter(|c| labels.contains(c)).collect();
    if present.len() < 2 {
        return Err(Error::Dataset(format!(
            "training requires at least 2 classes with finite features; corpus has {} ({} rows rejected as non-finite)",
            present.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "),
            rejected.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, val_idx) = stratified_split(&labels, cfg.validation_fraction, &mut rng);

    let reference: Vec<f64> = (0..names.len())
        .map(|j| {
            let m = median_abs(train_idx.iter().map(|&i| rows[i][j]).collect());
            if is_amplitude(&names[j]) && m > 0.0 && m.is_finite() {
                m
            } else {
                1.0
            }
        })
        .collect();
    let transformed: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| feature_transform(cfg.feature_set, names, &reference, r))
        .collect();
    let nt = train_idx.len() as f64;
    let mean: Vec<f64> = (0..names.len())
        .map(|j| train_idx.iter().map(|&i| transformed[i][j]).sum::<f64>() / nt)
        .collect();
    let scale: Vec<f64> = (0..names.len())
        .map(|j| {
            let var = train_idx.iter().map(|&i| (transformed[i][j] - mean[j]).powi(2)).sum::<f64>() / nt;
            let s = var.sqrt();
            if s > 1e-12 * (1.0 + mean[j].abs()) {
                s
            } else {
                1.0
            }
        })
        .collect();
    let norm = |r: &[f64]| -> Vec<f64> { r.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s).collect() };
    let x_train: Vec<Vec<f64>> = train_idx.iter().map(|&i| norm(&transformed[i])).collect();
    let y_train: Vec<ClassLabel> = train_idx.iter().map(|&i| labels[i]).collect();

    let params = match cfg.kind {
        ModelKind::Mlp => Params::Mlp(train_mlp(&x_train, &y_train, cfg, &mut rng)),
        ModelKind::NearestCentroid => Params::Centroids(
            ClassLabel::ALL
                .iter()
                .map(|&c| {
                    let members: Vec<&Vec<f64>> =
                        x_train.iter().zip(&y_train).filter(|(_, &l)| l == c).map(|(x, _)| x).collect();
                    (!members.is_empty()).then(|| {
                        (0..names.len())
                            .map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64)
                            .collect()
                    })
                })
                .collect(),
        ),
    };

    let mut model = ClassifierModel {
        metadata: TrainingMetadata {
            kind: cfg.kind,
            feature_set: cfg.feature_set,
            seed: cfg.seed,
            corpus_hash: corpus.content_hash(),
            timestamp: cfg.timestamp.clone(),
            feature_names: names.clone(),
            train_rows: train_idx.len(),
            validation_rows: val_idx.len(),
            rejected_rows: rejected,
            validation_accuracy: 0.0,
            validation_confusion: ConfusionMatrix::default(),
            config: cfg.clone(),
        },
        pipeline: pipeline.clone(),
        reference,
        mean,
        scale,
        params,
    };
    let mut cm = ConfusionMatrix::default();
    for &i in &val_idx {
        let (pred, _) = classify(&model, rows[i])?;
        cm.add(labels[i], pred);
    }
    model.metadata.validation_accuracy = cm.accuracy().unwrap_or(0.0);
    model.metadata.validation_confusion = cm;
    Ok(model)
}
