use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetaDataset;
use crate::classifiers::{argmax, check_dim, Classifier, TreeConfig, TreeModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    /// `None` means `⌈√m⌉` for `m` input columns.
    pub features_per_split: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Off only in tests that reduce the forest to a single CART tree.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            features_per_split: None,
            max_depth: Some(12),
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

/// Bagged CART trees with per-node feature sampling; majority vote with
/// ties to the lowest class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub tree_seeds: Vec<u64>,
    pub features_per_split: usize,
    pub n_classes: usize,
    pub feature_count: usize,
    /// Rows left out of each tree's bootstrap sample. Kept for inspection only.
    pub oob_indices: Vec<Vec<usize>>,
}

impl ForestModel {
    pub fn fit(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        config: &ForestConfig,
        seed: u64,
    ) -> Result<Self> {
        let n = x.rows();
        if n == 0 {
            return Err(Error::Precondition(
                "cannot fit a forest on zero rows".into(),
            ));
        }
        if config.trees == 0 {
            return Err(Error::Fit("forest needs at least one tree".into()));
        }
        let m = x.cols();
        let f = config
            .features_per_split
            .unwrap_or_else(|| (m as f64).sqrt().ceil() as usize);
        if f == 0 || f > m {
            return Err(Error::Fit(format!(
                "features per split {f} outside 1..={m}"
            )));
        }
        let tree_config = TreeConfig {
            max_depth: config.max_depth,
            min_samples_leaf: config.min_samples_leaf,
            features_per_split: Some(f),
        };
        let tree_seeds: Vec<u64> = (0..config.trees as u64)
            .map(|t| rng::mix(seed, t))
            .collect();

        let fitted: Vec<(TreeModel, Vec<usize>)> = tree_seeds
            .par_iter()
            .map(|&s| {
                let mut rng = rng::seeded(s);
                let (sample, oob) = if config.bootstrap {
                    let mut in_bag = vec![false; n];
                    let sample: Vec<usize> = (0..n)
                        .map(|_| {
                            let i = rng.random_range(0..n);
                            in_bag[i] = true;
                            i
                        })
                        .collect();
                    let oob = (0..n).filter(|&i| !in_bag[i]).collect();
                    (sample, oob)
                } else {
                    ((0..n).collect(), Vec::new())
                };
                let xs = x.select_rows(&sample);
                let ys: Vec<usize> = sample.iter().map(|&i| y[i]).collect();
                TreeModel::fit(&xs, &ys, n_classes, &tree_config, Some(&mut rng)).map(|t| (t, oob))
            })
            .collect::<Result<_>>()?;

        let (trees, oob_indices) = fitted.into_iter().unzip();
        Ok(ForestModel {
            trees,
            tree_seeds,
            features_per_split: f,
            n_classes,
            feature_count: m,
            oob_indices,
        })
    }

    /// Per-class vote counts for one row.
    pub fn votes(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.feature_count, x)?;
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(x)?] += 1;
        }
        Ok(votes)
    }

    pub fn vote_fractions(&self, x: &[f64]) -> Result<Vec<f64>> {
        let votes = self.votes(x)?;
        let t = self.trees.len() as f64;
        Ok(votes.iter().map(|&v| v as f64 / t).collect())
    }
}

/// Majority over vote counts; ties go to the lowest class id.
pub fn majority(votes: &[usize]) -> usize {
    let as_f: Vec<f64> = votes.iter().map(|&v| v as f64).collect();
    argmax(&as_f)
}

impl Classifier for ForestModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_row(&self, x: &[f64]) -> Result<usize> {
        Ok(majority(&self.votes(x)?))
    }
}

pub fn fit_forest(meta: &MetaDataset, config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    ForestModel::fit(&meta.features, &meta.labels, meta.n_classes, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<usize>) {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let c = (i % 2) as f64;
                vec![
                    c * 2.0 + (i as f64 * 0.31).sin(),
                    (i as f64 * 0.17).cos(),
                    c,
                ]
            })
            .collect();
        let y = (0..40).map(|i| i % 2).collect();
        (Matrix::from_rows(&rows, 3).unwrap(), y)
    }

    #[test]
    fn single_unbagged_tree_equals_cart() {
        let (x, y) = toy();
        let cfg = ForestConfig {
            trees: 1,
            features_per_split: Some(3),
            max_depth: Some(12),
            min_samples_leaf: 1,
            bootstrap: false,
        };
        let f = ForestModel::fit(&x, &y, 2, &cfg, 3).unwrap();
        let tree_cfg = TreeConfig {
            max_depth: Some(12),
            min_samples_leaf: 1,
            features_per_split: None,
        };
        let t = TreeModel::fit(&x, &y, 2, &tree_cfg, None).unwrap();
        assert_eq!(f.trees[0].nodes, t.nodes);
        assert_eq!(f.predict(&x).unwrap(), t.predict(&x).unwrap());
    }

    #[test]
    fn separable_meta_fit_perfectly() {
        let (x, y) = toy();
        let f = ForestModel::fit(
            &x,
            &y,
            2,
            &ForestConfig {
                trees: 101,
                ..Default::default()
            },
            8,
        )
        .unwrap();
        assert_eq!(f.predict(&x).unwrap(), y);
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, y) = toy();
        let cfg = ForestConfig {
            trees: 7,
            ..Default::default()
        };
        assert_eq!(
            ForestModel::fit(&x, &y, 2, &cfg, 1).unwrap(),
            ForestModel::fit(&x, &y, 2, &cfg, 1).unwrap()
        );
    }

    #[test]
    fn vote_rules() {
        assert_eq!(majority(&[51, 50]), 0);
        assert_eq!(majority(&[50, 50]), 0);
        assert_eq!(majority(&[1, 2]), 1);
    }

    #[test]
    fn bad_config_rejected() {
        let (x, y) = toy();
        assert!(ForestModel::fit(
            &x,
            &y,
            2,
            &ForestConfig {
                trees: 0,
                ..Default::default()
            },
            0
        )
        .is_err());
        let cfg = ForestConfig {
            features_per_split: Some(4),
            ..Default::default()
        };
        assert!(ForestModel::fit(&x, &y, 2, &cfg, 0).is_err());
        assert!(
            ForestModel::fit(&Matrix::zeros(0, 3), &[], 2, &ForestConfig::default(), 0).is_err()
        );
    }

    #[test]
    fn oob_rows_are_out_of_bag() {
        let (x, y) = toy();
        let f = ForestModel::fit(
            &x,
            &y,
            2,
            &ForestConfig {
                trees: 5,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        assert_eq!(f.oob_indices.len(), 5);
        assert!(f.oob_indices.iter().all(|o| !o.is_empty() && o.len() < 40));
    }
}
