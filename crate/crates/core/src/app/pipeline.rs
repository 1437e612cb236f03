use log::info;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Seeds};
use crate::blend::blend_pipeline;
use crate::classifiers::Classifier;
use crate::dataset::{clean, load_csv, split, Dataset, Preprocessor, SplitRatio};
use crate::error::{Error, Result};
use crate::eval::{select_final, AnnInput, Branch, EvaluationReport, FinalModel, Prediction};
use crate::matrix::Matrix;
use crate::net::train_net_xy;
use crate::synth::two_gaussians;

/// Fitted scalers followed by the two-level model. Accepts raw (encoded,
/// unscaled) feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub preprocessor: Preprocessor,
    pub model: FinalModel,
}

impl Pipeline {
    pub fn transform(&self, raw: &Matrix) -> Result<Matrix> {
        self.preprocessor.transform(raw)
    }

    pub fn predict(&self, raw: &Matrix) -> Result<Vec<usize>> {
        self.model.predict(&self.transform(raw)?)
    }

    pub fn predict_detail(&self, raw: &Matrix) -> Result<Vec<Prediction>> {
        self.model.predict_detail(&self.transform(raw)?)
    }

    pub fn chosen(&self) -> Branch {
        self.model.chosen
    }
}

/// A fitted pipeline and the raw validation rows the selection used.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub pipeline: Pipeline,
    pub validation: Dataset,
}

/// Reads the configured data source and cleans it.
pub fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let raw = match (&cfg.data.path, &cfg.data.synth) {
        (Some(path), _) => load_csv(path, &cfg.schema()?).map_err(|e| e.in_stage("load"))?,
        (None, Some(spec)) => two_gaussians(spec, cfg.seeds().data),
        (None, None) => return Err(Error::Config("no data source configured".into())),
    };
    let cleaned = clean(&raw);
    info!(
        "loaded {} rows, {} after cleaning",
        raw.len(),
        cleaned.len()
    );
    if cleaned.is_empty() {
        return Err(Error::Precondition("no usable rows after cleaning".into()).in_stage("clean"));
    }
    Ok(cleaned)
}

/// Keeps only rows whose features are all finite.
pub fn drop_incomplete(d: &Dataset) -> Dataset {
    let keep: Vec<usize> = (0..d.len())
        .filter(|&i| d.features().row(i).iter().all(|v| v.is_finite()))
        .collect();
    d.subset(&keep)
}

/// Fits scalers on `train`, carves the validation rows, runs the blend
/// stage, trains the network and selects the final branch.
pub fn fit_pipeline(train: &Dataset, cfg: &RunConfig, seeds: &Seeds) -> Result<Fitted> {
    let preprocessor = Preprocessor::fit(
        train.features(),
        cfg.preprocess.minmax,
        cfg.preprocess.standard,
    )
    .map_err(|e| e.in_stage("scale"))?;
    let scaled = train.with_features(preprocessor.transform(train.features())?)?;

    let carve = SplitRatio::from_train_fraction(1.0 - cfg.split.validation_fraction)?;
    let plan = split(&scaled, carve, seeds.validation, true)
        .map_err(|e| e.in_stage("validation split"))?;
    let main = scaled.subset(&plan.train_indices);
    let validation = scaled.subset(&plan.test_indices);

    let outcome =
        blend_pipeline(&main, &cfg.blend, seeds.blend).map_err(|e| e.in_stage("blend"))?;
    info!(
        "blend stage done: meta-dataset {}x{}",
        outcome.meta.len(),
        outcome.meta.features.cols()
    );

    let (x, y) = match cfg.net.input {
        AnnInput::Meta => (outcome.meta.features.clone(), outcome.meta.labels.clone()),
        AnnInput::Raw => {
            let holdout = main.subset(&outcome.plan.test_indices);
            (holdout.features().clone(), holdout.labels().to_vec())
        }
    };
    let mut layers = vec![x.cols()];
    layers.extend(&cfg.net.hidden);
    layers.push(train.n_classes());
    let spec = crate::net::TrainSpec {
        seed: seeds.net,
        ..cfg.net.train.clone()
    };
    let net =
        train_net_xy(&x, &y, train.n_classes(), &spec, &layers).map_err(|e| e.in_stage("net"))?;

    let model = select_final(
        outcome.model,
        net,
        cfg.net.input,
        &validation,
        cfg.select.beta,
    )
    .map_err(|e| e.in_stage("select"))?;
    info!(
        "selection: forest {} / ann {} correct of {}, chose {}",
        model.selection.forest_correct,
        model.selection.ann_correct,
        model.selection.total,
        model.chosen.name()
    );
    Ok(Fitted {
        pipeline: Pipeline {
            preprocessor,
            model,
        },
        validation: train.subset(&plan.test_indices),
    })
}

pub const BASE_NAMES: [&str; 3] = ["SVM", "NB", "DT"];
pub const FOREST_NAME: &str = "RF";
pub const ANN_NAME: &str = "ANN";

pub fn final_name(chosen: Branch) -> String {
    format!("final ({})", chosen.name())
}

/// Reports for the three base models, the forest, the network and the
/// final model on raw rows `test`, in that order.
pub fn evaluate_all(
    pipeline: &Pipeline,
    test: &Dataset,
    dataset: &str,
    provenance: &str,
) -> Result<Vec<EvaluationReport>> {
    let x = pipeline.transform(test.features())?;
    let model = &pipeline.model;
    let c = test.n_classes();
    let truth = test.labels();
    let mut out = Vec::with_capacity(6);
    for base in &model.blend.base {
        out.push(EvaluationReport::from_predictions(
            base.kind().name(),
            dataset,
            provenance,
            truth,
            &base.predict(&x)?,
            c,
        )?);
    }
    let forest = model.blend.predict(&x)?;
    let ann = model.net.predict(&model.ann_inputs(&x)?)?;
    let chosen = match model.chosen {
        Branch::Forest => forest.clone(),
        Branch::Ann => ann.clone(),
    };
    for (name, pred) in [
        (FOREST_NAME.to_owned(), forest),
        (ANN_NAME.to_owned(), ann),
        (final_name(model.chosen), chosen),
    ] {
        out.push(EvaluationReport::from_predictions(
            name, dataset, provenance, truth, &pred, c,
        )?);
    }
    Ok(out)
}

/// Outer split of the cleaned data into raw train and test portions.
pub fn outer_split(
    data: &Dataset,
    ratio: SplitRatio,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    let plan = split(data, ratio, seed, stratified).map_err(|e| e.in_stage("split"))?;
    Ok((
        data.subset(&plan.train_indices),
        data.subset(&plan.test_indices),
    ))
}
