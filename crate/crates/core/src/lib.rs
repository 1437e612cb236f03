//! Two-phase blended-ensemble intrusion detection for IIoT flow records.
//!
//! First phase: an SVM, a Gaussian naive Bayes model and a CART tree are
//! blended; their predictions on a held-out slice form a meta-dataset that
//! trains a random forest, while a sigmoid/softmax network trained with Adam
//! learns from the same meta-features. Second phase: a selection unit keeps
//! whichever of the two scores more correct predictions on validation data.

pub mod app;
pub mod blend;
pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod net;
pub mod rng;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use matrix::Matrix;
