//! Seeded two-Gaussian flow data, so the whole pipeline can run without
//! external downloads.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureSchema};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub features: usize,
    /// Class 0 is centred at `-mean`, class 1 at `+mean`, in every feature.
    pub mean: f64,
    pub std: f64,
    /// Share of rows in class 1 (attack).
    pub attack_fraction: f64,
    /// Share of rows whose label is flipped after sampling.
    pub label_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 2000,
            features: 6,
            mean: 2.0,
            std: 1.0,
            attack_fraction: 0.5,
            label_noise: 0.0,
        }
    }
}

impl SynthSpec {
    /// 94:6 normal/attack mix.
    pub fn imbalanced() -> Self {
        SynthSpec {
            attack_fraction: 0.06,
            ..Default::default()
        }
    }
}

pub fn two_gaussians(spec: &SynthSpec, seed: u64) -> Dataset {
    let mut rng = rng::seeded(seed);
    let attacks = (spec.n as f64 * spec.attack_fraction).round() as usize;
    let mut labels: Vec<usize> = (0..spec.n).map(|i| usize::from(i < attacks)).collect();
    labels.shuffle(&mut rng);

    let mut data = Vec::with_capacity(spec.n * spec.features);
    for &l in &labels {
        let centre = if l == 1 { spec.mean } else { -spec.mean };
        for _ in 0..spec.features {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(centre + spec.std * z);
        }
    }
    if spec.label_noise > 0.0 {
        let flips = (spec.n as f64 * spec.label_noise).round() as usize;
        let mut idx: Vec<usize> = (0..spec.n).collect();
        idx.shuffle(&mut rng);
        for &i in &idx[..flips.min(spec.n)] {
            labels[i] = 1 - labels[i];
        }
    }

    let schema = if spec.features == 6 {
        FeatureSchema::builtin("synthetic").expect("shipped")
    } else {
        let mut s = FeatureSchema::generic("synthetic", spec.features, 2);
        s.name = "synthetic".into();
        s
    };
    let features = Matrix::from_vec(spec.n, spec.features, data).expect("sized");
    Dataset::new(
        features,
        labels,
        Arc::new(schema),
        format!("synthetic(seed={seed})"),
    )
    .expect("consistent synthetic data")
}
