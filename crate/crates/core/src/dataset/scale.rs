use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-column `(min, max)` fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub ranges: Vec<(f64, f64)>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Precondition(
                "min-max scaling needs at least one row".into(),
            ));
        }
        let ranges = (0..x.cols())
            .map(|j| {
                x.iter_rows()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r[j]), hi.max(r[j]))
                    })
            })
            .collect();
        Ok(MinMaxScaler { ranges })
    }

    /// Maps into `[0, 1]`, clamping values outside the fitted range.
    /// Constant columns map to 0.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        check_width(self.ranges.len(), x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (v, &(lo, hi)) in out.row_mut(i).iter_mut().zip(&self.ranges) {
                *v = if hi > lo {
                    ((*v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

/// Per-column `(mean, population std)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub moments: Vec<(f64, f64)>,
}

impl StandardScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n < 2 {
            return Err(Error::Precondition(format!(
                "standard scaling needs at least two rows, got {n}"
            )));
        }
        let moments = (0..x.cols())
            .map(|j| {
                let mean = x.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64;
                let var = x.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64;
                (mean, var.sqrt())
            })
            .collect();
        Ok(StandardScaler { moments })
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        check_width(self.moments.len(), x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (v, &(mean, std)) in out.row_mut(i).iter_mut().zip(&self.moments) {
                *v = if std > 0.0 { (*v - mean) / std } else { 0.0 };
            }
        }
        Ok(out)
    }
}

fn check_width(expected: usize, x: &Matrix) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::Shape {
            expected,
            got: x.cols(),
        });
    }
    Ok(())
}

pub fn minmax_fit_transform(d: &Dataset) -> Result<(Dataset, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(d.features())?;
    let x = scaler.transform(d.features())?;
    Ok((d.with_features(x)?, scaler))
}

pub fn standard_fit_transform(d: &Dataset) -> Result<(Dataset, StandardScaler)> {
    let scaler = StandardScaler::fit(d.features())?;
    let x = scaler.transform(d.features())?;
    Ok((d.with_features(x)?, scaler))
}

/// Min-max then standard scaling, each optional, fitted once and replayed
/// on unseen rows. Categorical columns arrive already integer-encoded.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Preprocessor {
    pub minmax: Option<MinMaxScaler>,
    pub standard: Option<StandardScaler>,
}

impl Preprocessor {
    pub fn fit(x: &Matrix, minmax: bool, standard: bool) -> Result<Self> {
        let mut p = Preprocessor::default();
        let mut cur = x.clone();
        if minmax {
            let s = MinMaxScaler::fit(&cur)?;
            cur = s.transform(&cur)?;
            p.minmax = Some(s);
        }
        if standard {
            p.standard = Some(StandardScaler::fit(&cur)?);
        }
        Ok(p)
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = x.clone();
        if let Some(s) = &self.minmax {
            cur = s.transform(&cur)?;
        }
        if let Some(s) = &self.standard {
            cur = s.transform(&cur)?;
        }
        Ok(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn col(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn minmax_endpoints_and_midpoint() {
        let s = MinMaxScaler::fit(&col(&[0.0, 5.0, 10.0])).unwrap();
        assert_eq!(
            s.transform(&col(&[0.0, 5.0, 10.0])).unwrap().column(0),
            vec![0.0, 0.5, 1.0]
        );
    }

    #[test]
    fn minmax_constant_column_is_zero() {
        let s = MinMaxScaler::fit(&col(&[7.0, 7.0, 7.0])).unwrap();
        assert_eq!(
            s.transform(&col(&[7.0, 7.0, 7.0])).unwrap().column(0),
            vec![0.0; 3]
        );
    }

    #[test]
    fn minmax_clamps_unseen() {
        let s = MinMaxScaler::fit(&col(&[2.0, 4.0])).unwrap();
        assert_eq!(
            s.transform(&col(&[6.0, 0.0])).unwrap().column(0),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn minmax_rejects_empty() {
        assert!(MinMaxScaler::fit(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn standard_hand_computed() {
        // mean 4, population std sqrt(8/3)
        let out = StandardScaler::fit(&col(&[2.0, 4.0, 6.0]))
            .unwrap()
            .transform(&col(&[2.0, 4.0, 6.0]))
            .unwrap();
        let z = 2.0 / (8.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(out.get(0, 0), -z, epsilon = 1e-12);
        assert_abs_diff_eq!(out.get(1, 0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.get(2, 0), z, epsilon = 1e-12);
        assert_abs_diff_eq!(z, 1.2247, epsilon = 1e-4);
    }

    #[test]
    fn standard_constant_and_small() {
        let s = StandardScaler::fit(&col(&[3.0, 3.0])).unwrap();
        assert_eq!(
            s.transform(&col(&[3.0, 9.0])).unwrap().column(0),
            vec![0.0, 0.0]
        );
        assert!(StandardScaler::fit(&col(&[1.0])).is_err());
    }

    #[test]
    fn standard_idempotent() {
        let x = col(&[1.0, 3.5, -2.0, 8.25, 0.0, 4.0]);
        let once = StandardScaler::fit(&x).unwrap().transform(&x).unwrap();
        let twice = StandardScaler::fit(&once)
            .unwrap()
            .transform(&once)
            .unwrap();
        let c = twice.column(0);
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        let std = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-9);
    }

    #[test]
    fn preprocessor_replays_fit() {
        let x =
            Matrix::from_rows(&[vec![0.0, 10.0], vec![5.0, 20.0], vec![10.0, 40.0]], 2).unwrap();
        let p = Preprocessor::fit(&x, true, true).unwrap();
        let a = p.transform(&x).unwrap();
        let mm = p.minmax.as_ref().unwrap().transform(&x).unwrap();
        let b = p.standard.as_ref().unwrap().transform(&mm).unwrap();
        assert_eq!(a, b);
        let none = Preprocessor::fit(&x, false, false).unwrap();
        assert_eq!(none.transform(&x).unwrap(), x);
    }
}
