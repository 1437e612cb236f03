use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class best performance `B_k` over candidate models and the
/// threshold `T_k = B_k · β`. Performance is per-class recall. The gate is
/// reported alongside the final model; nothing downstream filters on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGate {
    pub beta: f64,
    pub models: Vec<String>,
    /// `table[k][m]`: performance of model `m` on class `k`.
    pub table: Vec<Vec<f64>>,
    pub best: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl ClassGate {
    /// Models whose performance on class `k` reaches `T_k`.
    pub fn passing(&self, k: usize) -> Vec<&str> {
        self.table[k]
            .iter()
            .zip(&self.models)
            .filter(|(&v, _)| v >= self.thresholds[k])
            .map(|(_, m)| m.as_str())
            .collect()
    }
}

pub fn class_gate(models: &[String], table: &[Vec<f64>], beta: f64) -> Result<ClassGate> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!(
            "confidence coefficient β = {beta} outside (0, 1]"
        )));
    }
    if table.is_empty() || models.is_empty() {
        return Err(Error::Precondition(
            "class gate needs at least one class and one model".into(),
        ));
    }
    if let Some(row) = table.iter().find(|r| r.len() != models.len()) {
        return Err(Error::Shape {
            expected: models.len(),
            got: row.len(),
        });
    }
    let best: Vec<f64> = table
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let thresholds = best.iter().map(|b| b * beta).collect();
    Ok(ClassGate {
        beta,
        models: models.to_vec(),
        table: table.to_vec(),
        best,
        thresholds,
    })
}
