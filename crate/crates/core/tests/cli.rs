//! Runs the `blendids` binary and checks outputs and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blendids::app::{parse_reports, ModelBundle};
use blendids::dataset::load_csv;

const FAST_CONFIG: &str = r#"
seed = 3

[data.synth]
n = 600

[blend.forest]
trees = 21

[net.train]
epochs = 40
"#;

fn blendids(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blendids"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains the fast config into `dir/run` and returns that directory.
fn trained(dir: &Path) -> PathBuf {
    let cfg = write(dir, "fast.toml", FAST_CONFIG);
    let run = dir.join("run");
    let o = blendids(&["train", "--config", s(&cfg), "--out", s(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    run
}

#[test]
fn train_writes_artifacts_and_table() {
    let tmp = tempfile::tempdir().unwrap();
    let run = trained(tmp.path());
    for f in ["bundle.json", "report.json", "test.csv"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let cfg = tmp.path().join("fast.toml");
    let o = blendids(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&tmp.path().join("again")),
    ]);
    let table = stdout(&o);
    assert!(table.contains("first level") && table.contains("integrated"));
    assert!(table.contains("final (forest)") || table.contains("final (ann)"));
    for m in ["SVM", "NB", "DT", "RF", "ANN"] {
        assert!(table.contains(m), "{m}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fast.toml", FAST_CONFIG);
    let run = |seed: &str, out: &str| {
        let o = blendids(&[
            "train",
            "--config",
            s(&cfg),
            "--seed",
            seed,
            "--out",
            s(&tmp.path().join(out)),
        ]);
        assert!(o.status.success());
        ModelBundle::load(tmp.path().join(out).join("bundle.json")).unwrap()
    };
    let a = run("3", "a");
    let b = run("4", "b");
    assert_eq!(a.config.seed, 3);
    assert_eq!(b.config.seed, 4);
    assert_ne!(a.digest, b.digest);
}

#[test]
fn evaluate_replays_stored_metrics_in_every_format() {
    let tmp = tempfile::tempdir().unwrap();
    let run = trained(tmp.path());
    let stored = parse_reports(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let o = blendids(&[
        "evaluate",
        "--bundle",
        s(&run),
        "--data",
        s(&run.join("test.csv")),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let replay = parse_reports(&stdout(&o)).unwrap();
    assert_eq!(replay[0].reports, stored[0].reports);

    let csv = stdout(&blendids(&[
        "evaluate",
        "--bundle",
        s(&run),
        "--data",
        s(&run.join("test.csv")),
        "--format",
        "csv",
    ]));
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let levels: Vec<&str> = rows.iter().map(|r| &r[5]).collect();
    assert_eq!(
        levels,
        [
            "first",
            "first",
            "first",
            "integrated",
            "integrated",
            "integrated"
        ]
    );
}

#[test]
fn predict_shapes_and_memorisation() {
    let tmp = tempfile::tempdir().unwrap();
    let run = trained(tmp.path());
    let bundle = ModelBundle::load(run.join("bundle.json")).unwrap();
    let test = load_csv(run.join("test.csv"), &bundle.schema).unwrap();
    let out = tmp.path().join("pred.csv");
    let o = blendids(&[
        "predict",
        "--bundle",
        s(&run),
        "--data",
        s(&run.join("test.csv")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "row",
            "prediction",
            "label",
            "forest",
            "forest_vote_0",
            "forest_vote_1",
            "ann",
            "ann_prob_0",
            "ann_prob_1"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), test.len());

    // An attack row copied verbatim from the generated data, label column dropped.
    let attack = (0..test.len()).find(|&i| test.labels()[i] == 1).unwrap();
    let header = "f0,f1,f2,f3,f4,f5";
    let row: Vec<String> = test
        .features()
        .row(attack)
        .iter()
        .map(f64::to_string)
        .collect();
    let single = write(
        tmp.path(),
        "one.csv",
        &format!("{header}\n{}\n", row.join(",")),
    );
    let out1 = tmp.path().join("one_pred.csv");
    assert!(blendids(&[
        "predict",
        "--bundle",
        s(&run),
        "--data",
        s(&single),
        "--out",
        s(&out1)
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&out1).unwrap();
    assert_eq!(text.lines().nth(1).unwrap().split(',').nth(1), Some("1"));
}

#[test]
fn predict_on_empty_file_writes_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    let run = trained(tmp.path());
    let empty = write(tmp.path(), "empty.csv", "");
    let out = tmp.path().join("p.csv");
    let o = blendids(&[
        "predict",
        "--bundle",
        s(&run),
        "--data",
        s(&empty),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");

    let header_only = write(tmp.path(), "header.csv", "f0,f1,f2,f3,f4,f5\n");
    let o = blendids(&[
        "predict",
        "--bundle",
        s(&run),
        "--data",
        s(&header_only),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_ratio = write(tmp.path(), "bad.toml", "[split]\nratio = \"50:50:10\"\n");
    assert_eq!(
        blendids(&["train", "--config", s(&bad_ratio)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(blendids(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        blendids(&["train", "--format", "xml"]).status.code(),
        Some(1)
    );
    assert_eq!(blendids(&["--help"]).status.code(), Some(0));

    let run = trained(tmp.path());
    let text = std::fs::read_to_string(run.join("test.csv")).unwrap();
    let extra: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i == 0 {
                format!("{l},extra\n")
            } else {
                format!("{l},0\n")
            }
        })
        .collect();
    let extra = write(tmp.path(), "extra.csv", &extra);
    let o = blendids(&["evaluate", "--bundle", s(&run), "--data", s(&extra)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("extra"));

    let diverge = write(
        tmp.path(),
        "diverge.toml",
        "[data.synth]\nn = 300\n[net.train]\nepochs = 3\n[net.train.optimizer]\nkind = \"sgd\"\nlearning_rate = 1e300\n",
    );
    let o = blendids(&[
        "train",
        "--config",
        s(&diverge),
        "--out",
        s(&tmp.path().join("d")),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("net"));
}

#[test]
fn report_renders_runs_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fast.toml", FAST_CONFIG);
    let runs = tmp.path().join("runs");
    for (seed, dir) in [("1", "one"), ("2", "two")] {
        let o = blendids(&[
            "train",
            "--config",
            s(&cfg),
            "--seed",
            seed,
            "--out",
            s(&runs.join(dir)),
        ]);
        assert!(o.status.success());
    }
    let table = stdout(&blendids(&["report", s(&runs)]));
    assert_eq!(table.matches("blended ensemble, final (").count(), 2);

    let json = stdout(&blendids(&["report", s(&runs), "--format", "json"]));
    let parsed = parse_reports(&json).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", json);

    let csv = stdout(&blendids(&["report", s(&runs), "--format", "csv"]));
    assert_eq!(csv.lines().count(), 1 + 2 * 6);

    let nothing = tempfile::tempdir().unwrap();
    assert_eq!(
        blendids(&["report", s(nothing.path())]).status.code(),
        Some(2)
    );
}

#[test]
fn crossval_folds_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fast.toml", FAST_CONFIG);
    let o = blendids(&[
        "crossval",
        "--config",
        s(&cfg),
        "--k",
        "5",
        "--sweep",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let kinds: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(kinds.iter().filter(|k| **k == "fold").count(), 5);
    assert_eq!(kinds.iter().filter(|k| **k == "summary").count(), 2);
    let ratios: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("ratio,"))
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(ratios, ["60:40", "70:30", "80:20"]);

    let tiny = write(
        tmp.path(),
        "tiny.toml",
        "[data.synth]\nn = 20\nattack_fraction = 0.15\n",
    );
    let o = blendids(&["crossval", "--config", s(&tiny), "--k", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fewer folds"));
}

#[test]
fn gen_synth_writes_requested_mix() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("synth.csv");
    let o = blendids(&[
        "gen-synth",
        "--out",
        s(&out),
        "--n",
        "1000",
        "--attack-fraction",
        "0.06",
        "--seed",
        "5",
    ]);
    assert!(o.status.success());
    let d = load_csv(
        &out,
        &blendids::dataset::FeatureSchema::builtin("synthetic").unwrap(),
    )
    .unwrap();
    assert_eq!(d.len(), 1000);
    assert_eq!(d.class_counts(), vec![940, 60]);
    assert_eq!(blendids(&["gen-synth"]).status.code(), Some(1));
}
