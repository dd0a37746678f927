use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{classify, ClassLabel, ClassifierModel, Corpus};
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted, in [`ClassLabel::ALL`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 4]; 4],
}

fn frac(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: ClassLabel) -> usize {
        self.counts[c.index()].iter().sum()
    }

    pub fn column_sum(&self, c: ClassLabel) -> usize {
        self.counts.iter().map(|r| r[c.index()]).sum()
    }

    pub fn precision(&self, c: ClassLabel) -> Option<f64> {
        frac(self.counts[c.index()][c.index()], self.column_sum(c))
    }

    pub fn recall(&self, c: ClassLabel) -> Option<f64> {
        frac(self.counts[c.index()][c.index()], self.row_sum(c))
    }

    pub fn accuracy(&self) -> Option<f64> {
        frac((0..4).map(|i| self.counts[i][i]).sum(), self.total())
    }

    /// Fault windows predicted as any fault class, over all fault windows.
    pub fn fault_recall(&self) -> Option<f64> {
        let faults = || ClassLabel::ALL.into_iter().filter(|c| c.is_fault());
        let hit = faults().flat_map(|t| faults().map(move |p| (t, p))).map(|(t, p)| self.counts[t.index()][p.index()]).sum();
        frac(hit, faults().map(|c| self.row_sum(c)).sum())
    }

    /// Share of arcing HIF windows labelled non-arcing HIF.
    pub fn arcing_as_non_arcing(&self) -> Option<f64> {
        frac(
            self.counts[ClassLabel::ArcingHif.index()][ClassLabel::NonArcingHif.index()],
            self.row_sum(ClassLabel::ArcingHif),
        )
    }

    /// Relabels classes: class `i` becomes `perm[i]` on both axes.
    pub fn permuted(&self, perm: [usize; 4]) -> Self {
        let mut out = Self::default();
        for i in 0..4 {
            for j in 0..4 {
                out.counts[perm[i]][perm[j]] = self.counts[i][j];
            }
        }
        out
    }
}

/// Aggregates reported for the laboratory classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedReference {
    pub fault_vs_normal_recall: f64,
    pub normal_recall: f64,
    pub arcing_as_non_arcing: f64,
}

impl Default for ReportedReference {
    fn default() -> Self {
        Self {
            fault_vs_normal_recall: 1.0,
            normal_recall: 0.9998,
            arcing_as_non_arcing: 0.015,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: [ClassLabel; 4],
    pub confusion: ConfusionMatrix,
    pub class_counts: [usize; 4],
    pub precision: [Option<f64>; 4],
    pub recall: [Option<f64>; 4],
    pub accuracy: f64,
    pub fault_vs_normal_recall: Option<f64>,
    pub normal_recall: Option<f64>,
    pub arcing_as_non_arcing: Option<f64>,
    pub reference: ReportedReference,
}

impl EvaluationReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let accuracy = confusion.accuracy().ok_or_else(|| Error::Dataset("cannot evaluate an empty corpus".into()))?;
        Ok(Self {
            classes: ClassLabel::ALL,
            confusion,
            class_counts: ClassLabel::ALL.map(|c| confusion.row_sum(c)),
            precision: ClassLabel::ALL.map(|c| confusion.precision(c)),
            recall: ClassLabel::ALL.map(|c| confusion.recall(c)),
            accuracy,
            fault_vs_normal_recall: confusion.fault_recall(),
            normal_recall: confusion.recall(ClassLabel::Normal),
            arcing_as_non_arcing: confusion.arcing_as_non_arcing(),
            reference: ReportedReference::default(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Plain-text confusion matrix, per-class metrics and the reference
    /// aggregates side by side.
    pub fn table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        let mut s = String::new();
        let _ = write!(s, "{:<16}", "true \\ pred");
        for c in ClassLabel::ALL {
            let _ = write!(s, "{:>16}", c.as_str());
        }
        s.push('\n');
        for t in ClassLabel::ALL {
            let _ = write!(s, "{:<16}", t.as_str());
            for p in ClassLabel::ALL {
                let _ = write!(s, "{:>16}", self.confusion.counts[t.index()][p.index()]);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "\n{:<16}{:>10}{:>12}{:>10}", "class", "count", "precision", "recall");
        for c in ClassLabel::ALL {
            let i = c.index();
            let _ = writeln!(
                s,
                "{:<16}{:>10}{:>12}{:>10}",
                c.as_str(),
                self.class_counts[i],
                pct(self.precision[i]),
                pct(self.recall[i])
            );
        }
        let _ = writeln!(s, "\noverall accuracy: {}", pct(Some(self.accuracy)));
        let _ = writeln!(s, "\n{:<36}{:>12}{:>12}", "aggregate", "this model", "reported");
        let rows = [
            ("faults detected as a fault", self.fault_vs_normal_recall, self.reference.fault_vs_normal_recall),
            ("normal states classified normal", self.normal_recall, self.reference.normal_recall),
            ("arcing HIF labelled non-arcing", self.arcing_as_non_arcing, self.reference.arcing_as_non_arcing),
        ];
        for (name, ours, theirs) in rows {
            let _ = writeln!(s, "{:<36}{:>12}{:>12}", name, pct(ours), pct(Some(theirs)));
        }
        s
    }
}

pub fn evaluate(model: &ClassifierModel, corpus: &Corpus) -> Result<EvaluationReport> {
    if corpus.is_empty() {
        return Err(Error::Dataset("cannot evaluate an empty corpus".into()));
    }
    if corpus.feature_names != model.feature_names() {
        return Err(Error::Mismatch("corpus feature columns differ from the model's".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for w in &corpus.windows {
        let (pred, _) = classify(model, &w.features)?;
        cm.add(w.label, pred);
    }
    EvaluationReport::from_confusion(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassLabel::*;

    fn example() -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for (t, n) in [(Normal, 50), (Lif, 20), (NonArcingHif, 30), (ArcingHif, 65)] {
            for _ in 0..n {
                cm.add(t, t);
            }
        }
        cm.add(ArcingHif, NonArcingHif);
        cm
    }

    #[test]
    fn cross_fault_confusion_still_counts_as_detected() {
        let r = EvaluationReport::from_confusion(example()).unwrap();
        assert_eq!(r.fault_vs_normal_recall, Some(1.0));
        assert_eq!(r.normal_recall, Some(1.0));
        assert!((r.arcing_as_non_arcing.unwrap() - 1.0 / 66.0).abs() < 1e-15);
        assert_eq!(r.class_counts, [50, 20, 30, 66]);
        assert!((r.accuracy - 165.0 / 166.0).abs() < 1e-15);
        assert_eq!(r.precision[NonArcingHif.index()], Some(30.0 / 31.0));
    }

    #[test]
    fn missed_fault_lowers_fault_recall() {
        let mut cm = example();
        cm.add(Lif, Normal);
        let r = EvaluationReport::from_confusion(cm).unwrap();
        assert!((r.fault_vs_normal_recall.unwrap() - 116.0 / 117.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_when_all_correct() {
        let mut cm = ConfusionMatrix::default();
        for c in ClassLabel::ALL {
            cm.add(c, c);
        }
        let r = EvaluationReport::from_confusion(cm).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(cm.counts[i][j], usize::from(i == j));
            }
        }
    }

    #[test]
    fn permutation_moves_rows_and_columns_together() {
        let cm = example();
        let p = cm.permuted([2, 0, 3, 1]);
        assert_eq!(p.total(), cm.total());
        assert_eq!(p.counts[1][2], cm.counts[3][0]);
        assert_eq!(p.counts[1][2], 0);
        assert_eq!(p.counts[1][3], 1); // arcing -> non-arcing
        assert_eq!(p.permuted([1, 3, 0, 2]), cm);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(EvaluationReport::from_confusion(ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn table_lists_reference_values() {
        let t = EvaluationReport::from_confusion(example()).unwrap().table();
        assert!(t.contains("99.98%"));
        assert!(t.contains("1.50%"));
        assert!(t.contains("arcing_hif"));
    }
}
