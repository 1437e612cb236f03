use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blendids::app::{self, Format, ModelBundle, RunConfig, BUNDLE_FILE};
use blendids::synth::SynthSpec;
use blendids::{Error, ErrorKind, Result};

/// Two-phase blended-ensemble intrusion detection.
#[derive(Debug, Parser)]
#[command(name = "blendids", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (file for `predict` and `gen-synth`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for printed reports.
    #[arg(long, global = true, default_value = "table", value_parser = ["table", "csv", "json"])]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the full pipeline and write its artifacts to --out.
    Train,
    /// Evaluate a bundle on labelled data.
    Evaluate {
        /// Bundle file, or a directory holding bundle.json.
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Predict classes for rows whose label column is optional.
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// K-fold cross-validation of the full pipeline.
    Crossval {
        /// Number of folds; overrides the config.
        #[arg(long)]
        k: Option<usize>,
        /// Also compare the 60:40, 70:30 and 80:20 outer splits.
        #[arg(long)]
        sweep: bool,
    },
    /// Render a comparison of saved run reports.
    Report {
        /// Directory holding report.json files (itself or one level down).
        dir: PathBuf,
    },
    /// Write a two-Gaussian synthetic dataset as CSV.
    GenSynth {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        features: Option<usize>,
        #[arg(long)]
        mean: Option<f64>,
        #[arg(long)]
        std: Option<f64>,
        #[arg(long)]
        attack_fraction: Option<f64>,
        #[arg(long)]
        label_noise: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn bundle_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(BUNDLE_FILE)
    } else {
        p.to_path_buf()
    }
}

fn run(cli: &Cli) -> Result<()> {
    let format: Format = cli.format.parse()?;
    match &cli.command {
        Command::Train => {
            let cfg = load_config(cli)?;
            let out = cfg.out.clone().unwrap_or_else(app::default_out);
            let outcome = app::train(&cfg)?;
            app::write_train_outputs(&outcome, &out)?;
            print!(
                "{}",
                app::render_runs(std::slice::from_ref(&outcome.report), format)?
            );
            eprintln!("bundle written to {}", out.join(BUNDLE_FILE).display());
        }
        Command::Evaluate { bundle, data } => {
            let bundle = ModelBundle::load(bundle_path(bundle))?;
            let report = app::evaluate(&bundle, data)?;
            if let Some(out) = &cli.out {
                report.write(out)?;
            }
            print!(
                "{}",
                app::render_runs(std::slice::from_ref(&report), format)?
            );
        }
        Command::Predict { bundle, data } => {
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::Config("predict needs --out <file>".into()))?;
            let bundle = ModelBundle::load(bundle_path(bundle))?;
            let n = app::predict(&bundle, data, out)?;
            eprintln!("wrote {n} predictions to {}", out.display());
        }
        Command::Crossval { k, sweep } => {
            let mut cfg = load_config(cli)?;
            if let Some(k) = k {
                cfg.split.k = *k;
            }
            let report = app::crossval(&cfg, *sweep)?;
            if let Some(out) = &cfg.out {
                std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
                let path = out.join("crossval.json");
                std::fs::write(&path, app::render_crossval(&report, Format::Json)?)
                    .map_err(|e| Error::io(&path, e))?;
            }
            print!("{}", app::render_crossval(&report, format)?);
        }
        Command::Report { dir } => {
            let runs = app::collect_reports(dir)?;
            print!("{}", app::render_runs(&runs, format)?);
        }
        Command::GenSynth {
            n,
            features,
            mean,
            std,
            attack_fraction,
            label_noise,
        } => {
            let mut spec = match &cli.config {
                Some(_) => load_config(cli)?.data.synth.unwrap_or_default(),
                None => SynthSpec::default(),
            };
            spec.n = n.unwrap_or(spec.n);
            spec.features = features.unwrap_or(spec.features);
            spec.mean = mean.unwrap_or(spec.mean);
            spec.std = std.unwrap_or(spec.std);
            spec.attack_fraction = attack_fraction.unwrap_or(spec.attack_fraction);
            spec.label_noise = label_noise.unwrap_or(spec.label_noise);
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::Config("gen-synth needs --out <file>".into()))?;
            let d = app::gen_synth(&spec, cli.seed.unwrap_or(0), out)?;
            eprintln!("wrote {} rows to {}", d.len(), out.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Training => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &cli.config {
                Some(p) => eprintln!("error (config {}): {e}", p.display()),
                None => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
