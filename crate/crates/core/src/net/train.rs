use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{adam_step, one_hot, AdamConfig, AdamState, NetModel, OutputMode};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Adam(AdamConfig),
    /// `w ← w + l·Err_j·O_r` per batch.
    Sgd {
        learning_rate: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam(AdamConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub output: OutputMode,
    /// Stop after this many epochs without validation-loss improvement,
    /// restoring the best parameters.
    pub patience: Option<usize>,
    /// Share of training rows held back for early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: 200,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::default(),
            output: OutputMode::Softmax,
            patience: None,
            validation_fraction: 0.1,
        }
    }
}

enum Stepper {
    Adam(AdamState),
    Sgd(f64),
}

impl Stepper {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Stepper::Adam(state) => adam_step(params, grads, state),
            Stepper::Sgd(lr) => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= *lr * g;
                }
                Ok(())
            }
        }
    }
}

fn mean_loss(net: &NetModel, x: &Matrix, y: &[usize], rows: &[usize]) -> Result<f64> {
    let c = net.output_size();
    let mut total = 0.0;
    for &i in rows {
        let acts = net.forward(x.row(i))?;
        total += net.loss(acts.output(), &one_hot(y[i], c));
    }
    Ok(total / rows.len().max(1) as f64)
}

/// Mini-batch training. `layers` lists every layer size, input first; at
/// least one hidden layer is required.
pub fn train_net(train: &Dataset, spec: &TrainSpec, layers: &[usize]) -> Result<NetModel> {
    train_net_xy(
        train.features(),
        train.labels(),
        train.n_classes(),
        spec,
        layers,
    )
}

pub fn train_net_xy(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    spec: &TrainSpec,
    layers: &[usize],
) -> Result<NetModel> {
    if layers.len() < 3 {
        return Err(Error::Config(format!(
            "network needs at least one hidden layer, got sizes {layers:?}"
        )));
    }
    if layers[0] != x.cols() {
        return Err(Error::Config(format!(
            "network input size {} does not match {} features",
            layers[0],
            x.cols()
        )));
    }
    if *layers.last().expect("len checked") != n_classes {
        return Err(Error::Config(format!(
            "network output size {} does not match {n_classes} classes",
            layers.last().expect("len checked")
        )));
    }
    if spec.epochs == 0 || spec.batch_size == 0 {
        return Err(Error::Config(
            "epochs and batch size must be at least 1".into(),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::Precondition(
            "cannot train a network on zero rows".into(),
        ));
    }
    if !x.all_finite() {
        return Err(Error::Precondition(
            "network training data contains non-finite values".into(),
        ));
    }

    let mut net = NetModel::new(layers, spec.output, rng::mix(spec.seed, 0))?;
    let mut order_rng = rng::seeded(rng::mix(spec.seed, 1));
    let mut params = net.params_flat();
    let mut stepper = match spec.optimizer {
        Optimizer::Adam(cfg) => Stepper::Adam(AdamState::new(cfg, params.len())),
        Optimizer::Sgd { learning_rate } => Stepper::Sgd(learning_rate),
    };

    let mut rows: Vec<usize> = (0..x.rows()).collect();
    let mut val_rows = Vec::new();
    if spec.patience.is_some() && x.rows() >= 10 {
        rows.shuffle(&mut rng::seeded(rng::mix(spec.seed, 2)));
        let n_val = ((x.rows() as f64 * spec.validation_fraction).round() as usize).max(1);
        val_rows = rows.split_off(rows.len() - n_val);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0usize;

    let mut acc = vec![0.0; params.len()];
    for epoch in 1..=spec.epochs {
        rows.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for batch in rows.chunks(spec.batch_size) {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &i in batch {
                let target = one_hot(y[i], n_classes);
                let acts = net.forward(x.row(i))?;
                epoch_loss += net.loss(acts.output(), &target);
                for (a, g) in acc.iter_mut().zip(net.backward(&acts, &target)?.flatten()) {
                    *a += g;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            acc.iter_mut().for_each(|a| *a *= scale);
            stepper.step(&mut params, &acc)?;
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    reason: "parameters became non-finite".into(),
                });
            }
            net.set_params_flat(&params)?;
        }
        epoch_loss /= rows.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("training loss is {epoch_loss}"),
            });
        }
        if let Some(patience) = spec.patience.filter(|_| !val_rows.is_empty()) {
            let val = mean_loss(&net, x, y, &val_rows)?;
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, params.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    log::debug!("early stop at epoch {epoch}");
                    break;
                }
            }
        }
    }
    if let Some((_, p)) = best {
        net.set_params_flat(&p)?;
    }
    net.final_loss = mean_loss(&net, x, y, &rows)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Classifier;

    fn xor() -> (Matrix, Vec<usize>) {
        let x = Matrix::from_rows(
            &[
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            2,
        )
        .unwrap();
        (x, vec![0, 1, 1, 0])
    }

    fn xor_spec(seed: u64) -> TrainSpec {
        TrainSpec {
            epochs: 2000,
            batch_size: 4,
            seed,
            optimizer: Optimizer::Adam(AdamConfig {
                learning_rate: 0.05,
                ..Default::default()
            }),
            ..Default::default()
        }
    }

    #[test]
    fn learns_xor() {
        let (x, y) = xor();
        for seed in 0..3 {
            let net = train_net_xy(&x, &y, 2, &xor_spec(seed), &[2, 4, 2]).unwrap();
            assert_eq!(net.predict(&x).unwrap(), y, "seed {seed}");
        }
    }

    #[test]
    fn no_hidden_layer_is_config_error() {
        let (x, y) = xor();
        assert!(matches!(
            train_net_xy(&x, &y, 2, &xor_spec(0), &[2, 2]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_net_xy(&x, &y, 2, &xor_spec(0), &[3, 4, 2]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let (x, y) = xor();
        let spec = TrainSpec {
            epochs: 50,
            ..xor_spec(3)
        };
        let a = train_net_xy(&x, &y, 2, &spec, &[2, 4, 2]).unwrap();
        let b = train_net_xy(&x, &y, 2, &spec, &[2, 4, 2]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn huge_sgd_step_diverges_with_epoch() {
        let (x, y) = xor();
        let spec = TrainSpec {
            epochs: 50,
            optimizer: Optimizer::Sgd {
                learning_rate: 1e300,
            },
            ..xor_spec(0)
        };
        match train_net_xy(&x, &y, 2, &spec, &[2, 4, 2]) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn sgd_mode_trains_sigmoid_outputs() {
        let (x, y) = xor();
        let spec = TrainSpec {
            epochs: 3000,
            batch_size: 1,
            optimizer: Optimizer::Sgd { learning_rate: 0.9 },
            output: OutputMode::SigmoidSquared,
            ..xor_spec(1)
        };
        let net = train_net_xy(&x, &y, 2, &spec, &[2, 6, 2]).unwrap();
        assert!(net.final_loss.is_finite());
        assert!(net.final_loss < 0.5 * 2.0 * 0.25);
    }

    #[test]
    fn early_stopping_restores_best() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i as f64 / 10.0).sin(), (i % 2) as f64])
            .collect();
        let y: Vec<usize> = (0..60).map(|i| i % 2).collect();
        let x = Matrix::from_rows(&rows, 2).unwrap();
        let spec = TrainSpec {
            epochs: 500,
            patience: Some(5),
            ..xor_spec(2)
        };
        let net = train_net_xy(&x, &y, 2, &spec, &[2, 4, 2]).unwrap();
        assert!(net.final_loss.is_finite());
    }
}
