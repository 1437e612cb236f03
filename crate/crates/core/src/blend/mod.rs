//! Blending: first-level predictions on a held-out slice become the
//! features of a second-level random forest.

mod forest;

use serde::{Deserialize, Serialize};

pub use forest::{fit_forest, majority, ForestConfig, ForestModel};

use crate::classifiers::{
    check_dim, fit_naive_bayes, fit_svm, fit_tree, BaseKind, BaseModel, Classifier,
};
use crate::dataset::{split, Dataset, SplitPlan, SplitRatio};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// What each base model contributes to a meta row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaMode {
    /// One predicted class id per model (3 columns).
    #[default]
    Labels,
    /// The full score vector per model (3·C columns).
    Scores,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaDataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub mode: MetaMode,
    pub source_models: Vec<BaseKind>,
    pub n_classes: usize,
}

impl MetaDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::from_parts(self.features.clone(), self.labels.clone(), self.n_classes)
    }
}

/// Meta row for a single feature row: the models' outputs concatenated in order.
pub fn meta_row(models: &[BaseModel], x: &[f64], mode: MetaMode) -> Result<Vec<f64>> {
    let mut row = Vec::new();
    for m in models {
        match mode {
            MetaMode::Labels => row.push(m.predict_row(x)? as f64),
            MetaMode::Scores => row.extend(m.predict_scores_row(x)?),
        }
    }
    Ok(row)
}

pub fn meta_width(models: &[BaseModel], mode: MetaMode) -> usize {
    match mode {
        MetaMode::Labels => models.len(),
        MetaMode::Scores => models.iter().map(|m| m.n_classes()).sum(),
    }
}

pub fn build_meta(models: &[BaseModel], holdout: &Dataset, mode: MetaMode) -> Result<MetaDataset> {
    if holdout.is_empty() {
        return Err(Error::Precondition("blending holdout is empty".into()));
    }
    let mut data = Vec::with_capacity(holdout.len() * meta_width(models, mode));
    for row in holdout.features().iter_rows() {
        data.extend(meta_row(models, row, mode)?);
    }
    Ok(MetaDataset {
        features: Matrix::from_vec(holdout.len(), meta_width(models, mode), data)?,
        labels: holdout.labels().to_vec(),
        mode,
        source_models: models.iter().map(BaseModel::kind).collect(),
        n_classes: holdout.n_classes(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseConfig {
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub nb_variance_floor: f64,
    pub tree_max_depth: Option<usize>,
    pub tree_min_samples_leaf: usize,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig {
            svm_lambda: 1e-4,
            svm_epochs: 20,
            nb_variance_floor: 1e-9,
            tree_max_depth: Some(12),
            tree_min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlendConfig {
    /// Share of the training rows used to fit the base models; the rest is
    /// the blending holdout.
    pub base_fraction: f64,
    pub mode: MetaMode,
    /// Append the raw features to every meta row.
    pub concat_raw: bool,
    pub base: BaseConfig,
    pub forest: ForestConfig,
}

impl Default for BlendConfig {
    fn default() -> Self {
        BlendConfig {
            base_fraction: 0.8,
            mode: MetaMode::Labels,
            concat_raw: false,
            base: BaseConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

/// The three fitted base models plus the forest trained on their outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendModel {
    pub base: Vec<BaseModel>,
    pub forest: ForestModel,
    pub mode: MetaMode,
    pub concat_raw: bool,
}

impl BlendModel {
    pub fn feature_count(&self) -> usize {
        self.base[0].feature_count()
    }

    /// Second-level input for one raw row.
    pub fn meta_features_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.feature_count(), x)?;
        let mut row = meta_row(&self.base, x, self.mode)?;
        if self.concat_raw {
            row.extend_from_slice(x);
        }
        Ok(row)
    }

    pub fn meta_features(&self, x: &Matrix) -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = x
            .iter_rows()
            .map(|r| self.meta_features_row(r))
            .collect::<Result<_>>()?;
        Matrix::from_rows(&rows, self.meta_width())
    }

    pub fn meta_width(&self) -> usize {
        meta_width(&self.base, self.mode)
            + if self.concat_raw {
                self.feature_count()
            } else {
                0
            }
    }
}

impl Classifier for BlendModel {
    fn n_classes(&self) -> usize {
        self.forest.n_classes
    }

    fn feature_count(&self) -> usize {
        BlendModel::feature_count(self)
    }

    fn predict_row(&self, x: &[f64]) -> Result<usize> {
        self.forest.predict_row(&self.meta_features_row(x)?)
    }
}

/// Everything `blend_pipeline` produced, including the meta-dataset the
/// forest saw (the network trains on the same one) and the split used.
#[derive(Debug, Clone)]
pub struct BlendOutcome {
    pub model: BlendModel,
    pub meta: MetaDataset,
    pub plan: SplitPlan,
}

/// Seed roles inside the blend stage.
const ROLE_SPLIT: u64 = 0;
const ROLE_SVM: u64 = 1;
const ROLE_FOREST: u64 = 2;

/// Fits h_0..h_2 on one stratified part of `train`, builds the meta-dataset
/// on the rest and fits the forest on it.
pub fn blend_pipeline(train: &Dataset, config: &BlendConfig, seed: u64) -> Result<BlendOutcome> {
    let ratio = SplitRatio::from_train_fraction(config.base_fraction)?;
    let plan = split(train, ratio, rng::mix(seed, ROLE_SPLIT), true).map_err(|e| match e {
        Error::Stratification(msg) => Error::Stratification(format!(
            "blend split: {msg}; more rows per class are needed for stratified blending"
        )),
        other => other,
    })?;
    let base_part = train.subset(&plan.train_indices);
    let holdout = train.subset(&plan.test_indices);
    for (part, name) in [(&base_part, "base-training"), (&holdout, "holdout")] {
        if let Some(c) = part.class_counts().iter().position(|&n| n == 0) {
            return Err(Error::Stratification(format!(
                "blend split: class {c} missing from the {name} portion; more rows per class are needed"
            )));
        }
    }

    let b = &config.base;
    let base = vec![
        fit_svm(
            &base_part,
            b.svm_lambda,
            b.svm_epochs,
            rng::mix(seed, ROLE_SVM),
        )?,
        fit_naive_bayes(&base_part, b.nb_variance_floor)?,
        fit_tree(&base_part, b.tree_max_depth, b.tree_min_samples_leaf)?,
    ];
    let mut meta = build_meta(&base, &holdout, config.mode)?;
    if config.concat_raw {
        meta.features = meta.features.hstack(holdout.features())?;
    }
    let forest = fit_forest(&meta, &config.forest, rng::mix(seed, ROLE_FOREST))?;
    Ok(BlendOutcome {
        model: BlendModel {
            base,
            forest,
            mode: config.mode,
            concat_raw: config.concat_raw,
        },
        meta,
        plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{two_gaussians, SynthSpec};

    fn blobs(n: usize, seed: u64) -> Dataset {
        two_gaussians(
            &SynthSpec {
                n,
                ..SynthSpec::default()
            },
            seed,
        )
    }

    fn quick_config() -> BlendConfig {
        BlendConfig {
            forest: ForestConfig {
                trees: 15,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn meta_shapes() {
        let d = blobs(300, 1);
        let out = blend_pipeline(&d, &quick_config(), 4).unwrap();
        let rows: Vec<usize> = (0..100).collect();
        let holdout = d.subset(&rows);
        let labels = build_meta(&out.model.base, &holdout, MetaMode::Labels).unwrap();
        assert_eq!((labels.features.rows(), labels.features.cols()), (100, 3));
        let scores = build_meta(&out.model.base, &holdout, MetaMode::Scores).unwrap();
        assert_eq!((scores.features.rows(), scores.features.cols()), (100, 6));
        assert_eq!(scores.labels, holdout.labels());
    }

    #[test]
    fn unanimous_models_give_ones_row() {
        let d = blobs(300, 2);
        let out = blend_pipeline(&d, &quick_config(), 4).unwrap();
        // far inside the positive blob every model agrees on class 1
        let row = meta_row(&out.model.base, &[2.0; 6], MetaMode::Labels).unwrap();
        assert_eq!(row, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn empty_holdout_rejected() {
        let d = blobs(300, 3);
        let out = blend_pipeline(&d, &quick_config(), 4).unwrap();
        let empty = d.subset(&[]);
        assert!(matches!(
            build_meta(&out.model.base, &empty, MetaMode::Labels),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn half_split_on_ten_rows() {
        let d = blobs(10, 5);
        let cfg = BlendConfig {
            base_fraction: 0.5,
            ..quick_config()
        };
        let out = blend_pipeline(&d, &cfg, 1).unwrap();
        assert_eq!(out.plan.train_indices.len(), 5);
        assert_eq!(out.plan.test_indices.len(), 5);
    }

    #[test]
    fn holdout_disjoint_from_base_rows() {
        let d = blobs(400, 6);
        let out = blend_pipeline(&d, &quick_config(), 9).unwrap();
        assert!(out.plan.test_indices.iter().all(|i| out
            .plan
            .train_indices
            .binary_search(i)
            .is_err()));
        assert_eq!(out.meta.len(), out.plan.test_indices.len());
    }

    #[test]
    fn single_row_prediction() {
        let d = blobs(300, 7);
        let out = blend_pipeline(&d, &quick_config(), 2).unwrap();
        let c = out.model.predict_row(d.features().row(0)).unwrap();
        assert!(c < 2);
    }

    #[test]
    fn starved_class_is_blend_error() {
        let mut labels = vec![0; 20];
        labels[0] = 1;
        let x = Matrix::from_vec(20, 1, (0..20).map(f64::from).collect()).unwrap();
        let d = Dataset::from_parts(x, labels, 2).unwrap();
        assert!(matches!(
            blend_pipeline(&d, &quick_config(), 0),
            Err(Error::Stratification(m)) if m.contains("blend split")
        ));
    }

    #[test]
    fn concat_raw_widens_meta() {
        let d = blobs(300, 8);
        let cfg = BlendConfig {
            concat_raw: true,
            ..quick_config()
        };
        let out = blend_pipeline(&d, &cfg, 2).unwrap();
        assert_eq!(out.meta.features.cols(), 9);
        assert_eq!(out.model.meta_width(), 9);
        assert!(out.model.predict_row(d.features().row(3)).is_ok());
    }
}
