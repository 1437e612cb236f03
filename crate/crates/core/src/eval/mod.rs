//! Metrics, the per-class gate and the forest-vs-network selection unit.

mod gate;
mod metrics;
mod select;

use serde::{Deserialize, Serialize};

pub use gate::{class_gate, ClassGate};
pub use metrics::{confusion, f1_score, metrics, ConfusionMatrix, Metrics};
pub use select::{
    select_between, select_branch, select_final, AnnInput, Branch, FinalModel, Prediction,
    Selection,
};

use crate::error::Result;

/// Metrics of one model on one evaluation set, with the counts they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub dataset: String,
    /// Split and seed the evaluation rows came from.
    pub provenance: String,
    /// `binary` (class 1 positive) or `macro`.
    pub averaging: String,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvaluationReport {
    pub fn new(
        model: impl Into<String>,
        dataset: impl Into<String>,
        provenance: impl Into<String>,
        confusion: ConfusionMatrix,
    ) -> Result<Self> {
        let m = metrics(&confusion)?;
        Ok(EvaluationReport {
            model: model.into(),
            dataset: dataset.into(),
            provenance: provenance.into(),
            averaging: if confusion.n_classes() == 2 {
                "binary"
            } else {
                "macro"
            }
            .into(),
            confusion,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        })
    }

    pub fn from_predictions(
        model: impl Into<String>,
        dataset: impl Into<String>,
        provenance: impl Into<String>,
        truth: &[usize],
        predicted: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        EvaluationReport::new(
            model,
            dataset,
            provenance,
            confusion(truth, predicted, n_classes)?,
        )
    }

    /// Recomputes the four metrics from the stored counts and compares exactly.
    pub fn is_consistent(&self) -> bool {
        metrics(&self.confusion).is_ok_and(|m| {
            m.accuracy == self.accuracy
                && m.precision == self.precision
                && m.recall == self.recall
                && m.f1 == self.f1
        })
    }
}
