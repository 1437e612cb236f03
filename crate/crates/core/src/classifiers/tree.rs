use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{argmax, check_dim, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Gini impurity `1 - Σ p_k²` of a class-count histogram.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn per node; `None` considers them all.
    pub features_per_split: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: Some(12),
            min_samples_leaf: 2,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<usize>,
    },
}

/// CART classification tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub n_classes: usize,
    pub feature_count: usize,
    pub config: TreeConfig,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    config: &'a TreeConfig,
    rng: Option<&'a mut Rng>,
    nodes: Vec<Node>,
}

impl TreeModel {
    /// Grows a tree on `x`/`y`. An `rng` is required when
    /// `config.features_per_split` is set.
    pub fn fit(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        config: &TreeConfig,
        rng: Option<&mut Rng>,
    ) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Precondition(
                "cannot grow a tree on zero rows".into(),
            ));
        }
        if x.rows() != y.len() {
            return Err(Error::Shape {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if config.min_samples_leaf == 0 {
            return Err(Error::Fit("min_samples_leaf must be at least 1".into()));
        }
        if let Some(f) = config.features_per_split {
            if f == 0 || f > x.cols() {
                return Err(Error::Fit(format!(
                    "features per split {f} outside 1..={}",
                    x.cols()
                )));
            }
            if rng.is_none() {
                return Err(Error::Fit("feature sampling needs a random stream".into()));
            }
        }
        let mut b = Builder {
            x,
            y,
            n_classes,
            config,
            rng,
            nodes: Vec::new(),
        };
        let rows: Vec<usize> = (0..x.rows()).collect();
        b.grow(rows, 0);
        Ok(TreeModel {
            nodes: b.nodes,
            n_classes,
            feature_count: x.cols(),
            config: config.clone(),
        })
    }

    fn leaf_counts(&self, x: &[f64]) -> Result<&[usize]> {
        check_dim(self.feature_count, x)?;
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { counts } => return Ok(counts),
            }
        }
    }

    /// Normalised class histogram of the leaf reached by `x`.
    pub fn leaf_distribution(&self, x: &[f64]) -> Result<Vec<f64>> {
        let counts = self.leaf_counts(x)?;
        let n: usize = counts.iter().sum();
        Ok(counts.iter().map(|&c| c as f64 / n as f64).collect())
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &r in &rows {
            counts[self.y[r]] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.config.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_reached || rows.len() < 2 * self.config.min_samples_leaf {
            return id;
        }
        let Some(split) = self.best_split(&rows) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x.get(r, split.feature) <= split.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.cols();
        match (self.config.features_per_split, self.rng.as_deref_mut()) {
            (Some(f), Some(rng)) if f < d => {
                let mut picked = index::sample(rng, d, f).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..d).collect(),
        }
    }

    /// Lowest weighted child Gini over midpoints of consecutive distinct
    /// values. Earlier features and thresholds win ties.
    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let n = rows.len();
        let min_leaf = self.config.min_samples_leaf;
        let mut best: Option<Split> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for feature in self.candidate_features() {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x.get(r, feature), self.y[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.n_classes];
            let mut right = vec![0usize; self.n_classes];
            for &(_, c) in &sorted {
                right[c] += 1;
            }
            for i in 1..n {
                let (prev, c) = sorted[i - 1];
                left[c] += 1;
                right[c] -= 1;
                let next = sorted[i].0;
                if prev == next || i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let impurity = (i as f64 * gini(&left) + (n - i) as f64 * gini(&right)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mut threshold = prev + (next - prev) / 2.0;
                    if threshold >= next {
                        threshold = prev;
                    }
                    best = Some(Split {
                        feature,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

impl Classifier for TreeModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict_row(&self, x: &[f64]) -> Result<usize> {
        let counts = self.leaf_counts(x)?;
        let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Ok(argmax(&as_f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unlimited() -> TreeConfig {
        TreeConfig {
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
        }
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[2, 2]), 0.5);
        assert_eq!(gini(&[0, 3]), 0.0);
        assert_eq!(gini(&[]), 0.0);
    }

    #[test]
    fn pure_node_is_leaf() {
        let x = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let t = TreeModel::fit(&x, &[1, 1, 1], 2, &unlimited(), None).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaf_distribution(&[2.0]).unwrap(), vec![0.0, 1.0]);
    }

    /// Exhaustive oracle: every midpoint candidate scored by weighted Gini.
    fn oracle_best_threshold(points: &[(f64, usize)]) -> f64 {
        let mut vals: Vec<f64> = points.iter().map(|p| p.0).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let mut best = (f64::INFINITY, f64::NAN);
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let mut l = [0usize; 2];
            let mut r = [0usize; 2];
            for &(v, c) in points {
                if v <= thr {
                    l[c] += 1
                } else {
                    r[c] += 1
                }
            }
            let nl = (l[0] + l[1]) as f64;
            let nr = (r[0] + r[1]) as f64;
            let imp = (nl * gini(&l) + nr * gini(&r)) / (nl + nr);
            if imp < best.0 {
                best = (imp, thr);
            }
        }
        best.1
    }

    #[test]
    fn root_threshold_is_midpoint() {
        let pts = [(1.0, 0), (2.0, 0), (8.0, 1), (9.0, 1)];
        let x = Matrix::from_vec(4, 1, pts.iter().map(|p| p.0).collect()).unwrap();
        let y: Vec<usize> = pts.iter().map(|p| p.1).collect();
        let t = TreeModel::fit(
            &x,
            &y,
            2,
            &TreeConfig {
                min_samples_leaf: 1,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert_eq!(oracle_best_threshold(&pts), 5.0);
        assert_eq!(t.root_split(), Some((0, 5.0)));
        assert_eq!(t.predict(&x).unwrap(), y);
    }

    #[test]
    fn depth_limit_respected() {
        let x = Matrix::from_vec(8, 1, (0..8).map(f64::from).collect()).unwrap();
        let y = [0, 1, 0, 1, 0, 1, 0, 1];
        let cfg = TreeConfig {
            max_depth: Some(2),
            min_samples_leaf: 1,
            features_per_split: None,
        };
        let t = TreeModel::fit(&x, &y, 2, &cfg, None).unwrap();
        assert!(t.depth() <= 2);
    }

    #[test]
    fn xor_needs_zero_gain_split() {
        let x = Matrix::from_rows(
            &[
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            2,
        )
        .unwrap();
        let y = [0, 1, 1, 0];
        let t = TreeModel::fit(&x, &y, 2, &unlimited(), None).unwrap();
        assert_eq!(t.predict(&x).unwrap(), y);
    }

    #[test]
    fn wrong_width_is_shape_error() {
        let x = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let t = TreeModel::fit(&x, &[0, 1], 2, &unlimited(), None).unwrap();
        assert!(matches!(
            t.predict_row(&[0.0, 1.0]),
            Err(Error::Shape { .. })
        ));
    }

    proptest! {
        #[test]
        fn unlimited_tree_memorises_consistent_data(
            raw in prop::collection::vec((0i32..6, 0i32..6, 0usize..2), 1..60)
        ) {
            // keep the first label for each distinct point so no conflicts remain
            let mut seen = std::collections::HashMap::new();
            for &(a, b, c) in &raw {
                seen.entry((a, b)).or_insert(c);
            }
            let mut pts: Vec<_> = seen.into_iter().collect();
            pts.sort();
            let rows: Vec<Vec<f64>> = pts.iter().map(|((a, b), _)| vec![*a as f64, *b as f64]).collect();
            let y: Vec<usize> = pts.iter().map(|(_, c)| *c).collect();
            let x = Matrix::from_rows(&rows, 2).unwrap();
            let t = TreeModel::fit(&x, &y, 2, &unlimited(), None).unwrap();
            prop_assert_eq!(t.predict(&x).unwrap(), y.clone());

            // leaf histograms account for every training row exactly once
            let leaf_total: usize = t.nodes.iter().map(|n| match n {
                Node::Leaf { counts } => counts.iter().sum(),
                Node::Split { .. } => 0,
            }).sum();
            let reachable_leaves: usize = {
                fn count(nodes: &[Node], at: usize) -> usize {
                    match &nodes[at] {
                        Node::Split { left, right, .. } => count(nodes, *left) + count(nodes, *right),
                        Node::Leaf { counts } => counts.iter().sum(),
                    }
                }
                count(&t.nodes, 0)
            };
            prop_assert_eq!(leaf_total, y.len());
            prop_assert_eq!(reachable_leaves, y.len());
        }
    }
}
