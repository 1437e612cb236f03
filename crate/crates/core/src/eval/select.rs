use serde::{Deserialize, Serialize};

use super::gate::{class_gate, ClassGate};
use super::metrics::confusion;
use crate::blend::BlendModel;
use crate::classifiers::{check_dim, Classifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net::NetModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Forest,
    Ann,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Forest => "forest",
            Branch::Ann => "ann",
        }
    }
}

/// What the network reads: the meta-features (default) or the raw
/// preprocessed features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnInput {
    #[default]
    Meta,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: Branch,
    pub forest_correct: usize,
    pub ann_correct: usize,
    pub total: usize,
}

/// `argmax` over the two indicator sums `Σ 1(y = h(a))`; ties keep the forest.
pub fn select_branch(
    forest_pred: &[usize],
    ann_pred: &[usize],
    labels: &[usize],
) -> Result<Selection> {
    if labels.is_empty() {
        return Err(Error::Precondition(
            "selection needs a non-empty validation set".into(),
        ));
    }
    for p in [forest_pred, ann_pred] {
        if p.len() != labels.len() {
            return Err(Error::Shape {
                expected: labels.len(),
                got: p.len(),
            });
        }
    }
    let correct = |p: &[usize]| p.iter().zip(labels).filter(|(a, b)| a == b).count();
    let forest_correct = correct(forest_pred);
    let ann_correct = correct(ann_pred);
    Ok(Selection {
        chosen: if ann_correct > forest_correct {
            Branch::Ann
        } else {
            Branch::Forest
        },
        forest_correct,
        ann_correct,
        total: labels.len(),
    })
}

/// Runs both candidates over their validation inputs and selects.
pub fn select_between<F, A>(
    forest: &F,
    forest_inputs: &Matrix,
    ann: &A,
    ann_inputs: &Matrix,
    labels: &[usize],
) -> Result<Selection>
where
    F: Classifier + ?Sized,
    A: Classifier + ?Sized,
{
    select_branch(
        &forest.predict(forest_inputs)?,
        &ann.predict(ann_inputs)?,
        labels,
    )
}

/// Per-row output of the full two-level model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub forest_class: usize,
    pub forest_votes: Vec<f64>,
    pub ann_class: usize,
    pub ann_probs: Vec<f64>,
}

/// The two-level model plus the outcome of the branch selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalModel {
    pub blend: BlendModel,
    pub net: NetModel,
    pub ann_input: AnnInput,
    pub chosen: Branch,
    pub selection: Selection,
    pub forest_validation_accuracy: f64,
    pub ann_validation_accuracy: f64,
    pub gate: ClassGate,
}

impl FinalModel {
    pub fn predict_detail_row(&self, x: &[f64]) -> Result<Prediction> {
        check_dim(self.blend.feature_count(), x)?;
        let meta = self.blend.meta_features_row(x)?;
        let forest_votes = self.blend.forest.vote_fractions(&meta)?;
        let forest_class = self.blend.forest.predict_row(&meta)?;
        let ann_probs = match self.ann_input {
            AnnInput::Meta => self.net.predict_proba_row(&meta)?,
            AnnInput::Raw => self.net.predict_proba_row(x)?,
        };
        let ann_class = crate::classifiers::argmax(&ann_probs);
        Ok(Prediction {
            class: match self.chosen {
                Branch::Forest => forest_class,
                Branch::Ann => ann_class,
            },
            forest_class,
            forest_votes,
            ann_class,
            ann_probs,
        })
    }

    pub fn predict_detail(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        x.iter_rows().map(|r| self.predict_detail_row(r)).collect()
    }

    /// The network's input for a raw row.
    pub fn ann_inputs(&self, x: &Matrix) -> Result<Matrix> {
        match self.ann_input {
            AnnInput::Meta => self.blend.meta_features(x),
            AnnInput::Raw => Ok(x.clone()),
        }
    }
}

impl Classifier for FinalModel {
    fn n_classes(&self) -> usize {
        self.blend.forest.n_classes
    }

    fn feature_count(&self) -> usize {
        self.blend.feature_count()
    }

    fn predict_row(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_detail_row(x)?.class)
    }
}

/// Chooses between forest and network on `validation` (raw, preprocessed
/// rows disjoint from every training portion). The class gate is computed
/// over the three base models on the same rows.
pub fn select_final(
    blend: BlendModel,
    net: NetModel,
    ann_input: AnnInput,
    validation: &Dataset,
    beta: f64,
) -> Result<FinalModel> {
    if validation.is_empty() {
        return Err(Error::Precondition(
            "selection needs a non-empty validation set".into(),
        ));
    }
    let meta = blend.meta_features(validation.features())?;
    let ann_x = match ann_input {
        AnnInput::Meta => meta.clone(),
        AnnInput::Raw => validation.features().clone(),
    };
    let selection = select_between(&blend.forest, &meta, &net, &ann_x, validation.labels())?;

    let c = validation.n_classes();
    let names: Vec<String> = blend
        .base
        .iter()
        .map(|m| m.kind().name().to_owned())
        .collect();
    let recalls: Vec<Vec<f64>> = blend
        .base
        .iter()
        .map(|m| {
            Ok(
                confusion(validation.labels(), &m.predict(validation.features())?, c)?
                    .per_class_recall(),
            )
        })
        .collect::<Result<_>>()?;
    let table: Vec<Vec<f64>> = (0..c)
        .map(|k| recalls.iter().map(|r| r[k]).collect())
        .collect();
    let gate = class_gate(&names, &table, beta)?;

    let n = selection.total as f64;
    Ok(FinalModel {
        chosen: selection.chosen,
        forest_validation_accuracy: selection.forest_correct as f64 / n,
        ann_validation_accuracy: selection.ann_correct as f64 / n,
        selection,
        blend,
        net,
        ann_input,
        gate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_of_counts() {
        let labels = vec![1usize; 100];
        let mut forest = labels.clone();
        let mut ann = labels.clone();
        forest[..3].iter_mut().for_each(|v| *v = 0);
        ann[..1].iter_mut().for_each(|v| *v = 0);
        let s = select_branch(&forest, &ann, &labels).unwrap();
        assert_eq!(
            (s.forest_correct, s.ann_correct, s.chosen),
            (97, 99, Branch::Ann)
        );
    }

    #[test]
    fn ties_keep_forest() {
        let labels = [0, 1, 0, 1];
        let s = select_branch(&[0, 1, 1, 1], &[0, 0, 0, 1], &labels).unwrap();
        assert_eq!(s.chosen, Branch::Forest);
        let perfect = select_branch(&labels, &labels, &labels).unwrap();
        assert_eq!(perfect.chosen, Branch::Forest);
        assert_eq!(perfect.forest_correct, 4);
    }

    #[test]
    fn empty_validation_rejected() {
        assert!(select_branch(&[], &[], &[]).is_err());
    }
}
