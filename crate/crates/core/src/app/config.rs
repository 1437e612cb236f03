use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blend::BlendConfig;
use crate::dataset::{FeatureSchema, SplitRatio};
use crate::error::{Error, Result};
use crate::eval::AnnInput;
use crate::net::TrainSpec;
use crate::rng;
use crate::synth::SynthSpec;

/// Where the rows come from: a CSV read under `schema`, or the built-in
/// two-Gaussian generator when `path` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Built-in schema name or path to a schema TOML file.
    pub schema: String,
    pub path: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            schema: "synthetic".into(),
            path: None,
            synth: Some(SynthSpec::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Outer train:test ratio, e.g. `"80:20"`.
    pub ratio: String,
    pub stratified: bool,
    /// Share of the outer training portion reserved for choosing between
    /// the forest and the network.
    pub validation_fraction: f64,
    /// Folds for `crossval`.
    pub k: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratio: "80:20".into(),
            stratified: true,
            validation_fraction: 0.1,
            k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub minmax: bool,
    pub standard: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            minmax: true,
            standard: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Hidden layer widths; input and output widths are inferred.
    pub hidden: Vec<usize>,
    pub input: AnnInput,
    /// `seed` here is ignored; the network seed comes from the master seed.
    pub train: TrainSpec,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden: vec![16],
            input: AnnInput::Meta,
            train: TrainSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    /// Confidence coefficient of the per-class gate.
    pub beta: f64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig { beta: 0.9 }
    }
}

/// Every knob of a run. All randomness derives from `seed` through
/// [`Seeds`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub preprocess: PreprocessConfig,
    pub blend: BlendConfig,
    pub net: NetConfig,
    pub select: SelectConfig,
    /// Output directory; not part of the bundle snapshot.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &Path| {
            if p.is_relative() {
                base.join(p)
            } else {
                p.to_path_buf()
            }
        };
        if let Some(p) = &cfg.data.path {
            cfg.data.path = Some(rebase(p));
        }
        if let Some(p) = &cfg.out {
            cfg.out = Some(rebase(p));
        }
        if FeatureSchema::builtin(&cfg.data.schema).is_none() {
            cfg.data.schema = rebase(Path::new(&cfg.data.schema)).display().to_string();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn ratio(&self) -> Result<SplitRatio> {
        self.split.ratio.parse()
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        FeatureSchema::resolve(&self.data.schema)
            .map_err(|e| Error::Config(format!("schema `{}`: {e}", self.data.schema)))
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        self.ratio()?;
        self.schema()?;
        let s = &self.split;
        if s.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", s.k)));
        }
        if !(s.validation_fraction > 0.0 && s.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in (0, 1), got {}",
                s.validation_fraction
            )));
        }
        let b = &self.blend;
        if !(b.base_fraction > 0.0 && b.base_fraction < 1.0) {
            return Err(Error::Config(format!(
                "blend base_fraction must lie in (0, 1), got {}",
                b.base_fraction
            )));
        }
        if b.forest.trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if self.net.hidden.is_empty() || self.net.hidden.contains(&0) {
            return Err(Error::Config(format!(
                "net.hidden must list positive widths, got {:?}",
                self.net.hidden
            )));
        }
        let t = &self.net.train;
        if t.epochs == 0 || t.batch_size == 0 {
            return Err(Error::Config(
                "net epochs and batch_size must be positive".into(),
            ));
        }
        let beta = self.select.beta;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1], got {beta}"
            )));
        }
        match (&self.data.path, &self.data.synth) {
            (Some(p), _) if !p.is_file() => Err(Error::Config(format!(
                "data file {} does not exist",
                p.display()
            ))),
            (None, None) => Err(Error::Config(
                "data needs either `path` or a `synth` table".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Copy stored in a bundle: the output directory is dropped so that
    /// the same run written to two places yields identical bundles.
    pub fn snapshot(&self) -> RunConfig {
        RunConfig {
            out: None,
            ..self.clone()
        }
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::derive(self.seed)
    }
}

/// Sub-seeds, each `mix(master, role)` for a fixed role number:
///
/// | role | stage |
/// |------|-------|
/// | 1 | synthetic data generation |
/// | 2 | outer train/test split |
/// | 3 | validation carve-out |
/// | 4 | blend stage (its own split, SVM, forest trees) |
/// | 5 | network init, batching and early-stop split |
/// | 6 | cross-validation folds |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: u64,
    pub split: u64,
    pub validation: u64,
    pub blend: u64,
    pub net: u64,
    pub folds: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        Seeds {
            data: rng::mix(master, 1),
            split: rng::mix(master, 2),
            validation: rng::mix(master, 3),
            blend: rng::mix(master, 4),
            net: rng::mix(master, 5),
            folds: rng::mix(master, 6),
        }
    }
}
