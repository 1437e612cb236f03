use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[t][p]` = rows with true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    /// Binary matrix from `(t_p, f_p, t_n, f_n)`, class 1 positive.
    pub fn binary(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![tn, fp], vec![fn_, tp]],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn tp(&self) -> usize {
        self.counts[1][1]
    }

    pub fn tn(&self) -> usize {
        self.counts[0][0]
    }

    pub fn fp(&self) -> usize {
        self.counts[0][1]
    }

    pub fn fn_(&self) -> usize {
        self.counts[1][0]
    }

    /// One-vs-rest `(tp, fp, fn)` for class `k`.
    pub fn one_vs_rest(&self, k: usize) -> (usize, usize, usize) {
        let tp = self.counts[k][k];
        let fp = (0..self.n_classes())
            .map(|t| self.counts[t][k])
            .sum::<usize>()
            - tp;
        let fn_ = self.counts[k].iter().sum::<usize>() - tp;
        (tp, fp, fn_)
    }

    /// Recall of every class; 0 for classes without support.
    pub fn per_class_recall(&self) -> Vec<f64> {
        (0..self.n_classes())
            .map(|k| {
                let (tp, _, fn_) = self.one_vs_rest(k);
                ratio(tp, tp + fn_)
            })
            .collect()
    }
}

pub fn confusion(
    truth: &[usize],
    predicted: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Precondition(
            "confusion matrix over zero samples".into(),
        ));
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Precondition(format!(
                "label pair ({t}, {p}) outside {n_classes} classes"
            )));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `num / den`, or 0 when `den` is 0.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2 · ((P · R) / (P + R))`, or 0 when `P + R` is 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * ((precision * recall) / (precision + recall))
    }
}

/// Accuracy, precision, recall and F1. Two classes use class 1 as the
/// positive class; more classes macro-average the one-vs-rest values.
/// Zero denominators yield 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    if cm.total() == 0 {
        return Err(Error::Precondition(
            "metrics of an empty confusion matrix".into(),
        ));
    }
    if cm.n_classes() == 2 {
        let (tp, fp, tn, fn_) = (cm.tp(), cm.fp(), cm.tn(), cm.fn_());
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        return Ok(Metrics {
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision,
            recall,
            f1: f1_score(precision, recall),
        });
    }
    let c = cm.n_classes() as f64;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for k in 0..cm.n_classes() {
        let (tp, fp, fn_) = cm.one_vs_rest(k);
        let pk = ratio(tp, tp + fp);
        let rk = ratio(tp, tp + fn_);
        p += pk;
        r += rk;
        f += f1_score(pk, rk);
    }
    Ok(Metrics {
        accuracy: ratio(cm.trace(), cm.total()),
        precision: p / c,
        recall: r / c,
        f1: f / c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_oracle() {
        let cm = confusion(&[1, 1, 0, 0], &[1, 0, 0, 0], 2).unwrap();
        assert_eq!((cm.tp(), cm.fn_(), cm.tn(), cm.fp()), (1, 1, 2, 0));
    }

    #[test]
    fn perfect_has_zero_off_diagonal() {
        let y = [0, 1, 2, 1, 0];
        let cm = confusion(&y, &y, 3).unwrap();
        assert_eq!(cm.trace(), cm.total());
        let single = confusion(&[1], &[1], 2).unwrap();
        assert_eq!(single.total(), 1);
        assert_eq!(metrics(&single).unwrap().accuracy, 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            confusion(&[0, 1], &[0], 2),
            Err(Error::Shape { .. })
        ));
        assert!(confusion(&[], &[], 2).is_err());
    }

    #[test]
    fn hand_computed_eighty_percent() {
        let m = metrics(&ConfusionMatrix::binary(40, 10, 40, 10)).unwrap();
        assert_eq!(m.accuracy, 0.8);
        assert_eq!(m.precision, 0.8);
        assert_eq!(m.recall, 0.8);
        assert!((m.f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn perfect_binary() {
        let m = metrics(&ConfusionMatrix::binary(5, 0, 7, 0)).unwrap();
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn zero_denominators_give_zero() {
        let m = metrics(&ConfusionMatrix::binary(0, 0, 9, 3)).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(metrics(&ConfusionMatrix::zeros(2)).is_err());
    }

    #[test]
    fn macro_average() {
        let cm = confusion(&[0, 0, 1, 1, 2, 2], &[0, 1, 1, 1, 2, 0], 3).unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!(m.accuracy, 4.0 / 6.0);
        // recalls 0.5, 1.0, 0.5
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cm.per_class_recall(), vec![0.5, 1.0, 0.5]);
    }
}
