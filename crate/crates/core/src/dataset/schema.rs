use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn numeric(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
        }
    }

    pub fn label(name: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Label,
        }
    }
}

/// Column layout and encodings for one flow-record dataset.
///
/// `label_aliases` rewrites raw label strings before encoding, which is how a
/// multi-category attack column collapses onto a binary target while
/// `label_encoding` itself stays injective. An empty `label_encoding` is
/// derived at load time (lexicographic order of the raw strings); the same
/// holds per column for `categories`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub columns: Vec<Column>,
    #[serde(default)]
    pub label_encoding: BTreeMap<String, usize>,
    #[serde(default)]
    pub label_aliases: BTreeMap<String, String>,
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
}

const WUSTL_IIOT_2018: &str = include_str!("../../schemas/wustl_iiot_2018.toml");
const N_BAIOT: &str = include_str!("../../schemas/n_baiot.toml");
const BOT_IOT: &str = include_str!("../../schemas/bot_iot.toml");
const SYNTHETIC: &str = include_str!("../../schemas/synthetic.toml");

impl FeatureSchema {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self> {
        let schema = FeatureSchema {
            name: name.into(),
            columns,
            label_encoding: BTreeMap::new(),
            label_aliases: BTreeMap::new(),
            categories: BTreeMap::new(),
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Numeric schema `f0..f{d-1}` plus a `label` column whose classes are `"0".."C-1"`.
    pub fn generic(name: impl Into<String>, feature_count: usize, n_classes: usize) -> Self {
        let mut columns: Vec<Column> = (0..feature_count)
            .map(|j| Column::numeric(format!("f{j}")))
            .collect();
        columns.push(Column::label("label"));
        FeatureSchema {
            name: name.into(),
            columns,
            label_encoding: (0..n_classes).map(|c| (c.to_string(), c)).collect(),
            label_aliases: BTreeMap::new(),
            categories: BTreeMap::new(),
        }
    }

    /// One of the shipped schemas: `wustl_iiot_2018`, `n_baiot`, `bot_iot`, `synthetic`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "wustl_iiot_2018" => WUSTL_IIOT_2018,
            "n_baiot" => N_BAIOT,
            "bot_iot" => BOT_IOT,
            "synthetic" => SYNTHETIC,
            _ => return None,
        };
        Some(Self::from_toml(text).expect("shipped schema is valid"))
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["wustl_iiot_2018", "n_baiot", "bot_iot", "synthetic"]
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: FeatureSchema =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    /// Resolves a builtin name first, then a file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(s) = Self::builtin(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!(
                "schema `{name_or_path}` is neither a builtin ({}) nor a readable file: {e}",
                Self::builtin_names().join(", ")
            ))
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "schema `{}` must have exactly one label column, found {labels}",
                self.name
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        let ids: BTreeSet<usize> = self.label_encoding.values().copied().collect();
        if ids.len() != self.label_encoding.len() {
            return Err(Error::Schema("label encoding is not injective".into()));
        }
        if let Some(&max) = ids.iter().next_back() {
            if max + 1 != ids.len() {
                return Err(Error::Schema(
                    "label encoding ids must be contiguous from 0".into(),
                ));
            }
        }
        for name in self.categories.keys() {
            match self.columns.iter().find(|c| &c.name == name) {
                Some(c) if c.kind == ColumnKind::Categorical => {}
                _ => {
                    return Err(Error::Schema(format!(
                        "category dictionary for `{name}` which is not a categorical column"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn label_column(&self) -> &Column {
        self.columns
            .iter()
            .find(|c| c.kind == ColumnKind::Label)
            .expect("validated schema has a label column")
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> + '_ {
        self.columns.iter().filter(|c| c.kind != ColumnKind::Label)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_columns().map(|c| c.name.clone()).collect()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_columns().count()
    }

    pub fn n_classes(&self) -> usize {
        self.label_encoding.len()
    }

    /// Class id for a raw label string, after alias rewriting.
    pub fn encode_label(&self, raw: &str) -> Option<usize> {
        let key = self
            .label_aliases
            .get(raw)
            .map(String::as_str)
            .unwrap_or(raw);
        self.label_encoding.get(key).copied()
    }

    pub fn decode_label(&self, id: usize) -> Option<&str> {
        self.label_encoding
            .iter()
            .find(|(_, &v)| v == id)
            .map(|(k, _)| k.as_str())
    }
}
