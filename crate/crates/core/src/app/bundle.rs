use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::pipeline::Pipeline;
use crate::dataset::FeatureSchema;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FORMAT_VERSION: u32 = 1;
pub const BUNDLE_FILE: &str = "bundle.json";

/// Raw rows with the predictions made when the bundle was written; loading
/// re-predicts them and refuses a bundle that disagrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub rows: Matrix,
    pub predictions: Vec<usize>,
}

/// Everything needed to predict on new raw rows, serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub schema: FeatureSchema,
    pub pipeline: Pipeline,
    pub config: RunConfig,
    pub replay: Replay,
    /// Hex SHA-256 of the compact JSON encoding with this field empty.
    pub digest: String,
}

impl ModelBundle {
    pub fn new(
        schema: FeatureSchema,
        pipeline: Pipeline,
        config: RunConfig,
        replay_rows: Matrix,
    ) -> Result<Self> {
        let predictions = pipeline.predict(&replay_rows)?;
        let mut bundle = ModelBundle {
            format_version: FORMAT_VERSION,
            schema,
            pipeline,
            config: config.snapshot(),
            replay: Replay {
                rows: replay_rows,
                predictions,
            },
            digest: String::new(),
        };
        bundle.digest = bundle.compute_digest()?;
        Ok(bundle)
    }

    pub fn compute_digest(&self) -> Result<String> {
        let unsigned = ModelBundle {
            digest: String::new(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&unsigned)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses the JSON and rejects a bundle that fails verification.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            other => {
                return Err(Error::Schema(format!(
                    "unsupported bundle format version {other:?}, expected {FORMAT_VERSION}"
                )))
            }
        }
        let bundle: ModelBundle = serde_json::from_value(value)?;
        let digest = bundle.compute_digest()?;
        if digest != bundle.digest {
            return Err(Error::Precondition(format!(
                "bundle digest mismatch: stored {}, computed {digest}",
                bundle.digest
            )));
        }
        let replayed = bundle.pipeline.predict(&bundle.replay.rows)?;
        if replayed != bundle.replay.predictions {
            return Err(Error::Precondition(
                "bundle replay predictions do not match the stored ones".into(),
            ));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        super::report::write_text(path.as_ref(), &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelBundle::from_json(&text).map_err(|e| e.in_stage("bundle load"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::{train, RunConfig};
    use crate::synth::SynthSpec;

    fn small_bundle() -> ModelBundle {
        let mut cfg = RunConfig::default();
        cfg.data.synth = Some(SynthSpec {
            n: 300,
            ..SynthSpec::default()
        });
        cfg.blend.forest.trees = 9;
        cfg.net.train.epochs = 20;
        train(&cfg).unwrap().bundle
    }

    #[test]
    fn json_round_trip_and_digest() {
        let b = small_bundle();
        assert_eq!(b.digest.len(), 64);
        assert_eq!(b.compute_digest().unwrap(), b.digest);
        let back = ModelBundle::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn tampering_detected() {
        let b = small_bundle();
        let mut v: serde_json::Value = serde_json::from_str(&b.to_json().unwrap()).unwrap();
        v["config"]["seed"] = serde_json::json!(999);
        let err = ModelBundle::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("digest"), "{err}");
    }

    #[test]
    fn wrong_version_rejected() {
        let b = small_bundle();
        let mut v: serde_json::Value = serde_json::from_str(&b.to_json().unwrap()).unwrap();
        v["format_version"] = serde_json::json!(FORMAT_VERSION + 1);
        assert!(matches!(
            ModelBundle::from_json(&v.to_string()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn replay_mismatch_rejected() {
        let mut b = small_bundle();
        b.replay.predictions[0] = 1 - b.replay.predictions[0];
        b.digest = b.compute_digest().unwrap();
        let err = ModelBundle::from_json(&b.to_json().unwrap()).unwrap_err();
        assert!(err.to_string().contains("replay"), "{err}");
    }

    #[test]
    fn output_dir_not_in_snapshot() {
        let b = small_bundle();
        assert!(b.config.out.is_none());
        assert!(!b.to_json().unwrap().contains("\"out\""));
    }
}
