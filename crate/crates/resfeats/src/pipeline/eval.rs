//! Classification metrics: overall accuracy, per-class accuracy, and a
//! truth × predicted confusion matrix.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    /// Row-major K×K counts; row = true class, column = predicted.
    pub confusion: Vec<usize>,
    pub k: usize,
}

impl EvalResult {
    pub fn confusion_at(&self, truth: usize, pred: usize) -> usize {
        self.confusion[truth * self.k + pred]
    }

    /// Samples whose true class is `truth` (confusion row sum).
    pub fn class_total(&self, truth: usize) -> usize {
        self.confusion[truth * self.k..(truth + 1) * self.k].iter().sum()
    }
}

pub fn evaluate(predictions: &[usize], truth: &[usize], k: usize) -> Result<EvalResult> {
    if predictions.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidConfig("no samples to evaluate".into()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("class count must be positive".into()));
    }
    let mut confusion = vec![0usize; k * k];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::IndexOutOfRange(format!(
                "label pair ({t}, {p}) out of range for {k} classes"
            )));
        }
        confusion[t * k + p] += 1;
    }
    let trace: usize = (0..k).map(|c| confusion[c * k + c]).sum();
    let overall_accuracy = trace as f64 / predictions.len() as f64;
    let per_class_accuracy = (0..k)
        .map(|c| {
            let total: usize = confusion[c * k..(c + 1) * k].iter().sum();
            if total == 0 {
                0.0
            } else {
                confusion[c * k + c] as f64 / total as f64
            }
        })
        .collect();
    Ok(EvalResult { overall_accuracy, per_class_accuracy, confusion, k })
}
