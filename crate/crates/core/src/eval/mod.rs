//! Confusion matrix, accuracy / precision / recall / F1, and the ablation
//! grid.

mod ablation;

pub use ablation::{
    run_ablation, AblationConfig, AblationReport, CellResult, CellSpec, CellStatus, CellSummary,
};

use std::fmt;

use crate::data::Label;
use crate::error::{GtdaError, Result};

/// Counts with the positive (minority) class as the detection target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fn_, fp, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn actual_positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn actual_negatives(&self) -> u64 {
        self.fp + self.tn
    }

    fn record(&mut self, predicted: Label, actual: Label) {
        match (actual, predicted) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Positive, Label::Negative) => self.fn_ += 1,
            (Label::Negative, Label::Positive) => self.fp += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
        }
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tp={} fn={} fp={} tn={}", self.tp, self.fn_, self.fp, self.tn)
    }
}

/// Confusion counts of position-aligned label lists.
pub fn confusion_from_labels(predicted: &[Label], actual: &[Label]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(GtdaError::InvalidInput(format!(
            "{} predictions for {} ground-truth labels",
            predicted.len(),
            actual.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        cm.record(p, a);
    }
    Ok(cm)
}

/// Confusion counts of `(id, label)` lists that must agree on ids, in order.
pub fn confusion<S: AsRef<str>, T: AsRef<str>>(
    predicted: &[(S, Label)],
    actual: &[(T, Label)],
) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(GtdaError::InvalidInput(format!(
            "{} predictions for {} ground-truth labels",
            predicted.len(),
            actual.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, ((pid, p), (aid, a))) in predicted.iter().zip(actual).enumerate() {
        if pid.as_ref() != aid.as_ref() {
            return Err(GtdaError::Data(format!(
                "row {i}: prediction for {:?} aligned with truth for {:?}",
                pid.as_ref(),
                aid.as_ref()
            )));
        }
        cm.record(*p, *a);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No positive predictions: precision reported as 0.
    pub precision_undefined: bool,
    /// No actual positives: recall reported as 0.
    pub recall_undefined: bool,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "acc={:.3} precision={:.3}{} recall={:.3}{} f1={:.3}",
            self.accuracy,
            self.precision,
            if self.precision_undefined { "*" } else { "" },
            self.recall,
            if self.recall_undefined { "*" } else { "" },
            self.f1
        )
    }
}

/// Accuracy, precision, recall and F1. Undefined ratios are reported as 0
/// and flagged; F1 is 0 when precision and recall are both 0.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let total = cm.total();
    let accuracy = if total == 0 { 0.0 } else { (cm.tp + cm.tn) as f64 / total as f64 };
    let predicted_pos = cm.tp + cm.fp;
    let precision_undefined = predicted_pos == 0;
    let precision = if precision_undefined { 0.0 } else { cm.tp as f64 / predicted_pos as f64 };
    let recall_undefined = cm.actual_positives() == 0;
    let recall = if recall_undefined { 0.0 } else { cm.tp as f64 / cm.actual_positives() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
    }
}

/// Rounds to three decimals, the precision results are reported at.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
