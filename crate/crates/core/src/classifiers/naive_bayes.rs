use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Gaussian naive Bayes with per-class priors and per-feature (mean, variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub variance_floor: f64,
}

impl NaiveBayesModel {
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize, variance_floor: f64) -> Result<Self> {
        if variance_floor.is_nan() || variance_floor <= 0.0 {
            return Err(Error::Fit(format!(
                "variance floor must be positive, got {variance_floor}"
            )));
        }
        if x.rows() != y.len() {
            return Err(Error::Shape {
                expected: x.rows(),
                got: y.len(),
            });
        }
        let d = x.cols();
        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![0.0; d]; n_classes];
        for (row, &c) in x.iter_rows().zip(y) {
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        if let Some(missing) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Fit(format!(
                "class {missing} has no training rows for naive Bayes"
            )));
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
        let mut variances = vec![vec![0.0; d]; n_classes];
        for (row, &c) in x.iter_rows().zip(y) {
            for ((s, v), m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
                *s += (v - m).powi(2);
            }
        }
        for (vars, &n) in variances.iter_mut().zip(&counts) {
            vars.iter_mut()
                .for_each(|v| *v = (*v / n as f64).max(variance_floor));
        }
        let total = y.len() as f64;
        Ok(NaiveBayesModel {
            priors: counts.iter().map(|&c| c as f64 / total).collect(),
            means,
            variances,
            variance_floor,
        })
    }

    /// `log π_k + Σ_j log N(x_j; μ_kj, σ²_kj)` for every class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.feature_count(), x)?;
        Ok(self
            .priors
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(&prior, (mu, var))| {
                prior.ln()
                    + x.iter()
                        .zip(mu.iter().zip(var))
                        .map(|(&v, (&m, &s2))| {
                            -0.5 * (2.0 * PI * s2).ln() - (v - m).powi(2) / (2.0 * s2)
                        })
                        .sum::<f64>()
            })
            .collect())
    }

    /// Class posteriors, normalised through log-sum-exp.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        let jll = self.joint_log_likelihood(x)?;
        let max = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + jll.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        Ok(jll.iter().map(|v| (v - lse).exp()).collect())
    }
}

impl Classifier for NaiveBayesModel {
    fn n_classes(&self) -> usize {
        self.priors.len()
    }

    fn feature_count(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn predict_row(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.joint_log_likelihood(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_feature(values: &[f64], labels: &[usize]) -> NaiveBayesModel {
        let x = Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap();
        NaiveBayesModel::fit(&x, labels, 2, 1e-9).unwrap()
    }

    #[test]
    fn hand_computed_log_likelihoods() {
        // class 0 = {0, 2}: mu 1, var 1; class 1 = {4, 6}: mu 5, var 1.
        let m = one_feature(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]);
        let jll = m.joint_log_likelihood(&[2.0]).unwrap();
        let base = 0.5f64.ln() - 0.5 * (2.0 * PI).ln();
        assert_abs_diff_eq!(jll[0], base - 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(jll[1], base - 4.5, epsilon = 1e-12);
        assert_eq!(m.predict_row(&[2.0]).unwrap(), 0);
    }

    #[test]
    fn midpoint_tie_goes_to_class_zero() {
        let m = one_feature(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]);
        let jll = m.joint_log_likelihood(&[3.0]).unwrap();
        assert_eq!(jll[0], jll[1]);
        assert_eq!(m.predict_row(&[3.0]).unwrap(), 0);
    }

    #[test]
    fn missing_class_is_fit_error() {
        let x = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            NaiveBayesModel::fit(&x, &[0, 0], 2, 1e-9),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn variance_floor_applies() {
        let m = one_feature(&[1.0, 1.0, 3.0, 5.0], &[0, 0, 1, 1]);
        assert_eq!(m.variances[0][0], 1e-9);
        assert!(m.posterior(&[1.0]).unwrap().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn wrong_width_is_shape_error() {
        let m = one_feature(&[0.0, 2.0, 4.0, 6.0], &[0, 0, 1, 1]);
        assert!(matches!(
            m.predict_row(&[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    /// Brute force: multiply densities directly, then normalise.
    fn posterior_oracle(m: &NaiveBayesModel, x: &[f64]) -> Vec<f64> {
        let joint: Vec<f64> = (0..m.priors.len())
            .map(|k| {
                let mut p = m.priors[k];
                for j in 0..x.len() {
                    let s2 = m.variances[k][j];
                    p *= (-(x[j] - m.means[k][j]).powi(2) / (2.0 * s2)).exp()
                        / (2.0 * PI * s2).sqrt();
                }
                p
            })
            .collect();
        let z: f64 = joint.iter().sum();
        joint.iter().map(|p| p / z).collect()
    }

    proptest! {
        #[test]
        fn posterior_matches_enumeration(
            d in 1usize..=3,
            rows in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 3), 0usize..3), 6..20),
            probe in prop::collection::vec(-1.5f64..1.5, 3),
        ) {
            let mut rows = rows;
            // guarantee every class appears
            for (c, row) in rows.iter_mut().take(3).enumerate() {
                row.1 = c;
            }
            let data: Vec<Vec<f64>> = rows.iter().map(|(r, _)| r[..d].to_vec()).collect();
            let labels: Vec<usize> = rows.iter().map(|(_, l)| *l).collect();
            let x = Matrix::from_rows(&data, d).unwrap();
            let m = NaiveBayesModel::fit(&x, &labels, 3, 0.05).unwrap();
            let got = m.posterior(&probe[..d]).unwrap();
            let want = posterior_oracle(&m, &probe[..d]);
            prop_assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-9, "{got:?} vs {want:?}");
            }
        }
    }
}
