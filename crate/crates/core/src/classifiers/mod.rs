//! First-level learners: linear SVM, Gaussian naive Bayes and a CART tree,
//! sharing one fit/predict contract.

mod naive_bayes;
mod svm;
mod tree;

use serde::{Deserialize, Serialize};

pub use naive_bayes::NaiveBayesModel;
pub use svm::SvmModel;
pub use tree::{gini, Node, TreeConfig, TreeModel};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Anything that maps a feature row to a class id.
pub trait Classifier {
    fn n_classes(&self) -> usize;
    fn feature_count(&self) -> usize;
    fn predict_row(&self, x: &[f64]) -> Result<usize>;

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Shape {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Svm,
    NaiveBayes,
    DecisionTree,
}

impl BaseKind {
    pub const ALL: [BaseKind; 3] = [BaseKind::Svm, BaseKind::NaiveBayes, BaseKind::DecisionTree];

    pub fn name(self) -> &'static str {
        match self {
            BaseKind::Svm => "SVM",
            BaseKind::NaiveBayes => "NB",
            BaseKind::DecisionTree => "DT",
        }
    }
}

/// A fitted first-level classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModel {
    Svm(SvmModel),
    NaiveBayes(NaiveBayesModel),
    DecisionTree(TreeModel),
}

impl BaseModel {
    pub fn kind(&self) -> BaseKind {
        match self {
            BaseModel::Svm(_) => BaseKind::Svm,
            BaseModel::NaiveBayes(_) => BaseKind::NaiveBayes,
            BaseModel::DecisionTree(_) => BaseKind::DecisionTree,
        }
    }

    /// Length-C scores: raw margins for the SVM, probabilities otherwise.
    pub fn predict_scores_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            BaseModel::Svm(m) => m.scores(x),
            BaseModel::NaiveBayes(m) => m.posterior(x),
            BaseModel::DecisionTree(m) => m.leaf_distribution(x),
        }
    }

    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        x.iter_rows().map(|r| self.predict_scores_row(r)).collect()
    }
}

impl Classifier for BaseModel {
    fn n_classes(&self) -> usize {
        match self {
            BaseModel::Svm(m) => m.n_classes(),
            BaseModel::NaiveBayes(m) => m.n_classes(),
            BaseModel::DecisionTree(m) => m.n_classes(),
        }
    }

    fn feature_count(&self) -> usize {
        match self {
            BaseModel::Svm(m) => m.feature_count(),
            BaseModel::NaiveBayes(m) => m.feature_count(),
            BaseModel::DecisionTree(m) => m.feature_count(),
        }
    }

    fn predict_row(&self, x: &[f64]) -> Result<usize> {
        match self {
            BaseModel::Svm(m) => m.predict_row(x),
            BaseModel::NaiveBayes(m) => m.predict_row(x),
            BaseModel::DecisionTree(m) => m.predict_row(x),
        }
    }
}

pub fn fit_naive_bayes(train: &Dataset, variance_floor: f64) -> Result<BaseModel> {
    train.ensure_finite()?;
    NaiveBayesModel::fit(
        train.features(),
        train.labels(),
        train.n_classes(),
        variance_floor,
    )
    .map(BaseModel::NaiveBayes)
}

pub fn fit_svm(train: &Dataset, lambda: f64, epochs: usize, seed: u64) -> Result<BaseModel> {
    SvmModel::fit(
        train.features(),
        train.labels(),
        train.n_classes(),
        lambda,
        epochs,
        seed,
    )
    .map(BaseModel::Svm)
}

/// `max_depth = None` grows until purity or the leaf-size limit.
pub fn fit_tree(
    train: &Dataset,
    max_depth: Option<usize>,
    min_samples_leaf: usize,
) -> Result<BaseModel> {
    train.ensure_finite()?;
    let config = TreeConfig {
        max_depth,
        min_samples_leaf,
        features_per_split: None,
    };
    TreeModel::fit(
        train.features(),
        train.labels(),
        train.n_classes(),
        &config,
        None,
    )
    .map(BaseModel::DecisionTree)
}
