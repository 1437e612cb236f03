//! Flow-record datasets: schema, CSV intake, cleaning, scaling and
//! train/test/fold partitioning.

mod clean;
mod csv_io;
mod scale;
mod schema;
mod split;

use std::sync::Arc;

pub use clean::{clean, is_missing_marker};
pub use csv_io::{load_csv, load_features_csv, write_csv};
pub use scale::{
    minmax_fit_transform, standard_fit_transform, MinMaxScaler, Preprocessor, StandardScaler,
};
pub use schema::{Column, ColumnKind, FeatureSchema};
pub use split::{kfold, split, split_labels, stratified_kfold, FoldPlan, SplitPlan, SplitRatio};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Features and class ids together with the schema they were read under.
///
/// Before [`clean`] the matrix may contain NaN cells standing for missing
/// markers; afterwards every cell is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    schema: Arc<FeatureSchema>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        schema: Arc<FeatureSchema>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if features.cols() != schema.feature_count() {
            return Err(Error::Shape {
                expected: schema.feature_count(),
                got: features.cols(),
            });
        }
        let c = schema.n_classes();
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Encoding(format!(
                "class id {bad} out of range for {c} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            schema,
            provenance: provenance.into(),
        })
    }

    /// Dataset over a [`FeatureSchema::generic`] schema.
    pub fn from_parts(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let schema = FeatureSchema::generic("generic", features.cols(), n_classes);
        Dataset::new(features, labels, Arc::new(schema), "in-memory")
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.schema.n_classes()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            schema: Arc::clone(&self.schema),
            provenance: self.provenance.clone(),
        }
    }

    pub fn with_features(&self, features: Matrix) -> Result<Dataset> {
        Dataset::new(
            features,
            self.labels.clone(),
            Arc::clone(&self.schema),
            self.provenance.clone(),
        )
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if self.features.all_finite() {
            Ok(())
        } else {
            Err(Error::Precondition(
                "dataset contains missing or non-finite values; run clean first".into(),
            ))
        }
    }
}
