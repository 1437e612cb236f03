//! Command implementations behind the `blendids` binary, together with
//! the run configuration and bundle types they share.

mod bundle;
mod config;
mod pipeline;
mod report;

use std::path::{Path, PathBuf};

use log::info;

pub use bundle::{ModelBundle, Replay, BUNDLE_FILE, FORMAT_VERSION};
pub use config::{
    DataConfig, NetConfig, PreprocessConfig, RunConfig, Seeds, SelectConfig, SplitConfig,
};
pub use pipeline::{
    drop_incomplete, evaluate_all, final_name, fit_pipeline, load_data, outer_split, Fitted,
    Pipeline, ANN_NAME, BASE_NAMES, FOREST_NAME,
};
pub use report::{
    collect_reports, parse_reports, render_crossval, render_runs, CrossvalReport, Format,
    RunReport, ScoreRow, Summary, REPORT_FILE,
};

use crate::dataset::{load_csv, load_features_csv, write_csv, Dataset, SplitRatio};
use crate::error::{Error, Result};
use crate::eval::EvaluationReport;
use crate::synth::{two_gaussians, SynthSpec};

pub const TEST_SLICE_FILE: &str = "test.csv";
/// Upper bound on replay rows stored in a bundle.
pub const REPLAY_ROWS: usize = 256;

/// Result of [`train`]: the bundle, the report on the held-out test rows
/// and those raw rows.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub report: RunReport,
    pub test: Dataset,
}

fn source_name(cfg: &RunConfig) -> String {
    match &cfg.data.path {
        Some(p) => p.display().to_string(),
        None => "synthetic generator".into(),
    }
}

fn run_report(
    cfg: &RunConfig,
    ratio: &str,
    n_train: usize,
    test: &Dataset,
    pipeline: &Pipeline,
    source: String,
) -> Result<RunReport> {
    let dataset = test.schema().name.clone();
    let provenance = format!("split {ratio}, seed {}", cfg.seed);
    let reports = evaluate_all(pipeline, test, &dataset, &provenance)?;
    Ok(RunReport {
        dataset,
        source,
        seed: cfg.seed,
        ratio: ratio.to_owned(),
        n_train,
        n_test: test.len(),
        chosen: pipeline.chosen(),
        selection: pipeline.model.selection,
        gate: pipeline.model.gate.clone(),
        zero_division: "0".into(),
        reports,
    })
}

/// load, clean, outer split, fit and evaluate on the held-out rows.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let ratio = cfg.ratio()?;
    let seeds = cfg.seeds();
    let (train_raw, test) = outer_split(&data, ratio, seeds.split, cfg.split.stratified)?;
    if test.is_empty() {
        return Err(Error::Precondition("outer split left no test rows".into()).in_stage("split"));
    }
    let fitted = fit_pipeline(&train_raw, cfg, &seeds)?;
    let report = run_report(
        cfg,
        &cfg.split.ratio,
        train_raw.len(),
        &test,
        &fitted.pipeline,
        source_name(cfg),
    )?;
    let n = fitted.validation.len().min(REPLAY_ROWS);
    let replay_rows = fitted
        .validation
        .subset(&(0..n).collect::<Vec<_>>())
        .features()
        .clone();
    let bundle = ModelBundle::new(
        (**test.schema()).clone(),
        fitted.pipeline,
        cfg.clone(),
        replay_rows,
    )?;
    Ok(TrainOutcome {
        bundle,
        report,
        test,
    })
}

/// Writes `bundle.json`, `report.json` and `test.csv` into `dir`.
pub fn write_train_outputs(outcome: &TrainOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    outcome.bundle.save(dir.join(BUNDLE_FILE))?;
    outcome.report.write(dir)?;
    write_csv(&outcome.test, dir.join(TEST_SLICE_FILE))?;
    info!("wrote bundle, report and test slice to {}", dir.display());
    Ok(())
}

/// Loads labelled rows under the bundle's schema and evaluates every model.
pub fn evaluate(bundle: &ModelBundle, data: &Path) -> Result<RunReport> {
    let d = load_csv(data, &bundle.schema).map_err(|e| e.in_stage("load"))?;
    let d = drop_incomplete(&d);
    if d.is_empty() {
        return Err(Error::Precondition("no complete rows to evaluate".into()).in_stage("load"));
    }
    run_report(
        &bundle.config,
        &bundle.config.split.ratio,
        0,
        &d,
        &bundle.pipeline,
        data.display().to_string(),
    )
}

/// Predicts every row of `data` (label column optional) and writes a CSV
/// with the final class, its decoded label and both candidates' outputs.
/// Returns the number of rows written. An empty input file yields an
/// empty output file.
pub fn predict(bundle: &ModelBundle, data: &Path, out: &Path) -> Result<usize> {
    let meta = std::fs::metadata(data).map_err(|e| Error::io(data, e))?;
    if meta.len() == 0 {
        report::write_text(out, "")?;
        return Ok(0);
    }
    let (x, _) = load_features_csv(data, &bundle.schema).map_err(|e| e.in_stage("load"))?;
    if let Some(r) = (0..x.rows()).find(|&r| !x.row(r).iter().all(|v| v.is_finite())) {
        return Err(
            Error::Precondition(format!("row {} has missing values", r + 1)).in_stage("load"),
        );
    }
    let preds = bundle.pipeline.predict_detail(&x)?;
    let c = bundle.schema.n_classes();
    let mut header = vec![
        "row".to_owned(),
        "prediction".into(),
        "label".into(),
        "forest".into(),
    ];
    header.extend((0..c).map(|k| format!("forest_vote_{k}")));
    header.push("ann".into());
    header.extend((0..c).map(|k| format!("ann_prob_{k}")));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(&header)?;
    for (i, p) in preds.iter().enumerate() {
        let mut rec = vec![
            (i + 1).to_string(),
            p.class.to_string(),
            bundle
                .schema
                .decode_label(p.class)
                .unwrap_or_default()
                .to_owned(),
            p.forest_class.to_string(),
        ];
        rec.extend(p.forest_votes.iter().map(f64::to_string));
        rec.push(p.ann_class.to_string());
        rec.extend(p.ann_probs.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(preds.len())
}

fn score_row(label: String, n_train: usize, r: &RunReport) -> ScoreRow {
    let f: &EvaluationReport = r.final_report().expect("final report present");
    ScoreRow {
        label,
        n_train,
        n_test: r.n_test,
        chosen: r.chosen,
        accuracy: f.accuracy,
        precision: f.precision,
        recall: f.recall,
        f1: f.f1,
    }
}

pub const SWEEP_RATIOS: [&str; 3] = ["60:40", "70:30", "80:20"];

/// Runs the whole pipeline on each of `cfg.split.k` folds (stratified when
/// configured) and optionally on the three outer ratios of the sweep.
pub fn crossval(cfg: &RunConfig, sweep: bool) -> Result<CrossvalReport> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let seeds = cfg.seeds();
    let k = cfg.split.k;
    let plan = if cfg.split.stratified {
        crate::dataset::stratified_kfold(&data, k, seeds.folds)
    } else {
        crate::dataset::kfold(&data, k, seeds.folds)
    }
    .map_err(|e| e.in_stage("crossval folds"))?;
    let mut folds = Vec::with_capacity(k);
    for i in 0..k {
        let (tr, te) = plan.train_test(i);
        let (train_raw, test) = (data.subset(&tr), data.subset(&te));
        let fitted = fit_pipeline(&train_raw, cfg, &seeds).map_err(|e| {
            Error::Stratification(format!(
                "fold {}: {e}; use fewer folds or more rows per class",
                i + 1
            ))
            .in_stage("crossval")
        })?;
        let r = run_report(
            cfg,
            &format!("fold {}/{k}", i + 1),
            tr.len(),
            &test,
            &fitted.pipeline,
            source_name(cfg),
        )?;
        info!(
            "fold {}: accuracy {:.4}",
            i + 1,
            r.final_report().map_or(0.0, |f| f.accuracy)
        );
        folds.push(score_row(format!("{}", i + 1), tr.len(), &r));
    }
    let sweep = if sweep {
        let mut rows = Vec::new();
        for ratio in SWEEP_RATIOS {
            let parsed: SplitRatio = ratio.parse()?;
            let (train_raw, test) = outer_split(&data, parsed, seeds.split, cfg.split.stratified)?;
            let fitted = fit_pipeline(&train_raw, cfg, &seeds)?;
            let r = run_report(
                cfg,
                ratio,
                train_raw.len(),
                &test,
                &fitted.pipeline,
                source_name(cfg),
            )?;
            rows.push(score_row(ratio.to_owned(), train_raw.len(), &r));
        }
        Some(rows)
    } else {
        None
    };
    let col = |f: fn(&ScoreRow) -> f64| Summary::of(&folds.iter().map(f).collect::<Vec<_>>());
    Ok(CrossvalReport {
        dataset: data.schema().name.clone(),
        seed: cfg.seed,
        k,
        accuracy: col(|r| r.accuracy),
        precision: col(|r| r.precision),
        recall: col(|r| r.recall),
        f1: col(|r| r.f1),
        folds,
        sweep,
    })
}

/// Writes a two-Gaussian dataset as CSV. Returns the generated rows.
pub fn gen_synth(spec: &SynthSpec, seed: u64, out: &Path) -> Result<Dataset> {
    if spec.n == 0 || spec.features == 0 {
        return Err(Error::Config(
            "synthetic data needs n > 0 and features > 0".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.attack_fraction) || !(0.0..=1.0).contains(&spec.label_noise) {
        return Err(Error::Config(
            "attack_fraction and label_noise must lie in [0, 1]".into(),
        ));
    }
    let d = two_gaussians(spec, seed);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_csv(&d, out)?;
    Ok(d)
}

/// Default output directory when neither flag nor config names one.
pub fn default_out() -> PathBuf {
    PathBuf::from("runs/latest")
}
