use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ClassLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: usize,
    pub seed: u64,
    pub start_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub features: Vec<f64>,
    pub label: ClassLabel,
    pub provenance: Provenance,
}

/// Labelled feature rows plus their column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub feature_names: Vec<String>,
    pub windows: Vec<LabeledWindow>,
}

const FIXED_COLUMNS: [&str; 4] = ["scenario", "seed", "start_time", "label"];

impl Corpus {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self {
            feature_names,
            windows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for w in &self.windows {
            c[w.label.index()] += 1;
        }
        c
    }

    /// SHA-256 over labels and the exact feature bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        for w in &self.windows {
            h.update([w.label.index() as u8]);
            for v in &w.features {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// CSV with header `scenario,seed,start_time,label,<features...>`.
    /// Floats use the shortest round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&FIXED_COLUMNS.join(","));
        for n in &self.feature_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for w in &self.windows {
            let p = &w.provenance;
            let _ = write!(out, "{},{},{},{}", p.scenario, p.seed, p.start_time, w.label.as_str());
            for v in &w.features {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Format("empty corpus file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < FIXED_COLUMNS.len() || cols[..4] != FIXED_COLUMNS {
            return Err(Error::Format(format!(
                "corpus header must start with `{}`",
                FIXED_COLUMNS.join(",")
            )));
        }
        let feature_names: Vec<String> = cols[4..].iter().map(|s| s.to_string()).collect();
        let mut corpus = Corpus::new(feature_names);
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("corpus line {}: {what}", lineno + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(bad(&format!("expected {} fields, got {}", cols.len(), fields.len())));
            }
            let provenance = Provenance {
                scenario: fields[0].parse().map_err(|_| bad("bad scenario"))?,
                seed: fields[1].parse().map_err(|_| bad("bad seed"))?,
                start_time: fields[2].parse().map_err(|_| bad("bad start_time"))?,
            };
            let label = ClassLabel::parse(fields[3]).ok_or_else(|| bad(&format!("unknown label `{}`", fields[3])))?;
            let features = fields[4..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(&format!("bad number `{f}`"))))
                .collect::<Result<_>>()?;
            corpus.windows.push(LabeledWindow {
                features,
                label,
                provenance,
            });
        }
        Ok(corpus)
    }
}
