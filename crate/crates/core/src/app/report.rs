use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Branch, ClassGate, EvaluationReport, Selection};

use super::pipeline::BASE_NAMES;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!(
                "unknown format `{other}`; expected table, csv or json"
            ))),
        }
    }
}

/// One training or evaluation run: per-model reports in the order base
/// models, forest, network, final.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub source: String,
    pub seed: u64,
    pub ratio: String,
    pub n_train: usize,
    pub n_test: usize,
    pub chosen: Branch,
    pub selection: Selection,
    pub gate: ClassGate,
    /// Metrics with a zero denominator are reported as 0.
    pub zero_division: String,
    pub reports: Vec<EvaluationReport>,
}

impl RunReport {
    pub fn first_level(&self) -> impl Iterator<Item = &EvaluationReport> {
        self.reports
            .iter()
            .filter(|r| BASE_NAMES.contains(&r.model.as_str()))
    }

    pub fn integrated(&self) -> impl Iterator<Item = &EvaluationReport> {
        self.reports
            .iter()
            .filter(|r| !BASE_NAMES.contains(&r.model.as_str()))
    }

    pub fn final_report(&self) -> Option<&EvaluationReport> {
        self.reports.last()
    }

    pub fn model(&self, name: &str) -> Option<&EvaluationReport> {
        self.reports.iter().find(|r| r.model == name)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(REPORT_FILE);
        write_text(&path, &(serde_json::to_string_pretty(self)? + "\n"))?;
        Ok(path)
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses either a single run report or an array of them.
pub fn parse_reports(text: &str) -> Result<Vec<RunReport>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    Ok(if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    })
}

/// Collects every `report.json` under `dir` (one level of subdirectories
/// deep), sorted by path.
pub fn collect_reports(dir: &Path) -> Result<Vec<RunReport>> {
    let mut paths = Vec::new();
    let direct = dir.join(REPORT_FILE);
    if direct.is_file() {
        paths.push(direct);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let p = entry
            .map_err(|e| Error::io(dir, e))?
            .path()
            .join(REPORT_FILE);
        if p.is_file() {
            paths.push(p);
        }
    }
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        out.extend(parse_reports(&text).map_err(|e| e.in_stage("report parse"))?);
    }
    if out.is_empty() {
        return Err(Error::Precondition(format!(
            "no {REPORT_FILE} found in {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn metric_table(out: &mut String, rows: &[&EvaluationReport]) {
    let _ = writeln!(
        out,
        "  {:<16} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "model", "accuracy", "precision", "recall", "f1", "correct"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "  {:<16} {:>9} {:>9} {:>9} {:>9} {:>9}",
            r.model,
            pct(r.accuracy),
            pct(r.precision),
            pct(r.recall),
            pct(r.f1),
            format!("{}/{}", r.confusion.trace(), r.confusion.total())
        );
    }
}

fn render_table(runs: &[RunReport]) -> String {
    let mut out = String::new();
    for (i, run) in runs.iter().enumerate() {
        let _ = writeln!(
            out,
            "run {}: {} ({}), seed {}, split {}, {} train / {} test rows",
            i + 1,
            run.dataset,
            run.source,
            run.seed,
            run.ratio,
            run.n_train,
            run.n_test
        );
        let _ = writeln!(out, " first level");
        metric_table(&mut out, &run.first_level().collect::<Vec<_>>());
        let _ = writeln!(out, " integrated");
        metric_table(&mut out, &run.integrated().collect::<Vec<_>>());
        let _ = writeln!(
            out,
            " selection: forest {} / ann {} correct of {} validation rows\n",
            run.selection.forest_correct, run.selection.ann_correct, run.selection.total
        );
    }
    let _ = writeln!(out, "comparison (accuracy %)");
    let _ = writeln!(out, "  {:<44} {:>9}", "technique", "accuracy");
    for run in runs {
        if let Some(f) = run.final_report() {
            let label = format!("blended ensemble, {} [{}]", f.model, run.dataset);
            let _ = writeln!(out, "  {:<44} {:>9}", label, pct(f.accuracy));
        }
    }
    out
}

const CSV_HEADER: [&str; 15] = [
    "run",
    "dataset",
    "source",
    "seed",
    "ratio",
    "level",
    "model",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "correct",
    "total",
    "averaging",
    "counts",
];

fn render_csv(runs: &[RunReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for (i, run) in runs.iter().enumerate() {
        for r in &run.reports {
            let level = if BASE_NAMES.contains(&r.model.as_str()) {
                "first"
            } else {
                "integrated"
            };
            let counts = r
                .confusion
                .counts
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                (i + 1).to_string(),
                run.dataset.clone(),
                run.source.clone(),
                run.seed.to_string(),
                run.ratio.clone(),
                level.to_owned(),
                r.model.clone(),
                r.accuracy.to_string(),
                r.precision.to_string(),
                r.recall.to_string(),
                r.f1.to_string(),
                r.confusion.trace().to_string(),
                r.confusion.total().to_string(),
                r.averaging.clone(),
                counts,
            ])?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Precondition(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_runs(runs: &[RunReport], format: Format) -> Result<String> {
    match format {
        Format::Table => Ok(render_table(runs)),
        Format::Csv => render_csv(runs),
        Format::Json => Ok(serde_json::to_string_pretty(runs)? + "\n"),
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Summary {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Final-model metrics of one fold or one ratio of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub label: String,
    pub n_train: usize,
    pub n_test: usize,
    pub chosen: Branch,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub dataset: String,
    pub seed: u64,
    pub k: usize,
    pub folds: Vec<ScoreRow>,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    /// Present when the ratio sweep was requested.
    pub sweep: Option<Vec<ScoreRow>>,
}

fn score_line(out: &mut String, r: &ScoreRow) {
    let _ = writeln!(
        out,
        "  {:<8} {:>7} {:>7} {:>7} {:>9} {:>9} {:>9} {:>9}",
        r.label,
        r.n_train,
        r.n_test,
        r.chosen.name(),
        pct(r.accuracy),
        pct(r.precision),
        pct(r.recall),
        pct(r.f1)
    );
}

fn score_header(out: &mut String, first: &str) {
    let _ = writeln!(
        out,
        "  {:<8} {:>7} {:>7} {:>7} {:>9} {:>9} {:>9} {:>9}",
        first, "train", "test", "chosen", "accuracy", "precision", "recall", "f1"
    );
}

pub fn render_crossval(r: &CrossvalReport, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(r)? + "\n"),
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{}-fold cross-validation on {} (seed {})",
                r.k, r.dataset, r.seed
            );
            score_header(&mut out, "fold");
            r.folds.iter().for_each(|f| score_line(&mut out, f));
            let s = |m: &Summary| format!("{}±{}", pct(m.mean), pct(m.std));
            let _ = writeln!(
                out,
                "  {:<8} {:>7} {:>7} {:>7} {:>9} {:>9} {:>9} {:>9}",
                "mean±std",
                "",
                "",
                "",
                s(&r.accuracy),
                s(&r.precision),
                s(&r.recall),
                s(&r.f1)
            );
            if let Some(sweep) = &r.sweep {
                let _ = writeln!(out, "\nsplit-ratio sweep");
                score_header(&mut out, "ratio");
                sweep.iter().for_each(|f| score_line(&mut out, f));
            }
            Ok(out)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "kind",
                "label",
                "n_train",
                "n_test",
                "chosen",
                "accuracy",
                "precision",
                "recall",
                "f1",
            ])?;
            let row = |w: &mut csv::Writer<Vec<u8>>, kind: &str, f: &ScoreRow| {
                w.write_record([
                    kind.to_owned(),
                    f.label.clone(),
                    f.n_train.to_string(),
                    f.n_test.to_string(),
                    f.chosen.name().to_owned(),
                    f.accuracy.to_string(),
                    f.precision.to_string(),
                    f.recall.to_string(),
                    f.f1.to_string(),
                ])
            };
            for f in &r.folds {
                row(&mut w, "fold", f)?;
            }
            for (name, pick) in [("mean", 0), ("std", 1)] {
                let v = |m: &Summary| if pick == 0 { m.mean } else { m.std }.to_string();
                w.write_record([
                    "summary".to_owned(),
                    name.to_owned(),
                    String::new(),
                    String::new(),
                    String::new(),
                    v(&r.accuracy),
                    v(&r.precision),
                    v(&r.recall),
                    v(&r.f1),
                ])?;
            }
            for f in r.sweep.iter().flatten() {
                row(&mut w, "ratio", f)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::Precondition(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_parsing() {
        assert_eq!("table".parse::<Format>().unwrap(), Format::Table);
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
        assert!(matches!("xml".parse::<Format>(), Err(Error::Config(_))));
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[0.9, 1.0, 0.95]);
        assert!((s.mean - 0.95).abs() < 1e-12);
        // sample variance: (0.0025 + 0.0025 + 0) / 2
        assert!((s.std - 0.0025f64.sqrt()).abs() < 1e-12);
        assert_eq!((s.min, s.max), (0.9, 1.0));
        assert_eq!(Summary::of(&[0.5]).std, 0.0);
    }
}
