use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Linear soft-margin SVM trained by Pegasos-style stochastic subgradient
/// descent on the hinge loss. Two classes use one scorer (class 1 positive);
/// more classes use one-vs-rest.
///
/// The bias is learned as the weight of a constant input, so it is
/// regularised together with `w`. The returned weights are the average of
/// the iterates over the second half of training, which damps the
/// oscillation of the `1/(λt)` schedule when λ is small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub lambda: f64,
    pub epochs: usize,
    pub n_classes: usize,
}

impl SvmModel {
    pub fn fit(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        lambda: f64,
        epochs: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = x.rows();
        if n < 2 {
            return Err(Error::Fit(format!("SVM needs at least two rows, got {n}")));
        }
        if n != y.len() {
            return Err(Error::Shape {
                expected: n,
                got: y.len(),
            });
        }
        if !x.all_finite() {
            return Err(Error::Fit(
                "SVM training data contains non-finite values".into(),
            ));
        }
        if lambda.is_nan() || lambda <= 0.0 || epochs == 0 {
            return Err(Error::Fit(format!(
                "SVM needs lambda > 0 and epochs >= 1 (got {lambda}, {epochs})"
            )));
        }
        let positives: Vec<usize> = if n_classes == 2 {
            vec![1]
        } else {
            (0..n_classes).collect()
        };
        let mut weights = Vec::with_capacity(positives.len());
        let mut biases = Vec::with_capacity(positives.len());
        for (p, &class) in positives.iter().enumerate() {
            let targets: Vec<f64> = y
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            let pos = targets.iter().filter(|&&t| t > 0.0).count();
            if pos == 0 || pos == n {
                return Err(Error::Fit(format!(
                    "SVM subproblem for class {class} needs both positive and negative rows"
                )));
            }
            let (w, b) = pegasos(x, &targets, lambda, epochs, rng::mix(seed, p as u64));
            weights.push(w);
            biases.push(b);
        }
        Ok(SvmModel {
            weights,
            biases,
            lambda,
            epochs,
            n_classes,
        })
    }

    /// Raw margins, one per class. With two classes the single margin `m`
    /// is reported as `[-m, m]`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.feature_count(), x)?;
        let margins: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect();
        Ok(if self.n_classes == 2 {
            vec![-margins[0], margins[0]]
        } else {
            margins
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pegasos(x: &Matrix, targets: &[f64], lambda: f64, epochs: usize, seed: u64) -> (Vec<f64>, f64) {
    let n = x.rows();
    let d = x.cols();
    let mut rng = rng::seeded(seed);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut avg_w = vec![0.0; d];
    let mut avg_b = 0.0;
    let mut averaged = 0usize;
    let total = epochs * n;
    let average_from = total / 2;
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = x.row(i);
            let yi = targets[i];
            let margin = yi * (dot(&w, row) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += eta * yi * xj;
                }
                b += eta * yi;
            }
            if t > average_from {
                averaged += 1;
                let k = averaged as f64;
                for (a, wj) in avg_w.iter_mut().zip(&w) {
                    *a += (wj - *a) / k;
                }
                avg_b += (b - avg_b) / k;
            }
        }
    }
    (avg_w, avg_b)
}

impl Classifier for SvmModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn feature_count(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn predict_row(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}
