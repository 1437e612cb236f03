//! Feedforward classifier: logistic hidden units, softmax (or per-unit
//! sigmoid) outputs, backpropagated error signals and Adam updates.

mod adam;
mod train;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use train::{train_net, train_net_xy, Optimizer, TrainSpec};

use crate::classifiers::{argmax, check_dim, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// Softmax outputs with cross-entropy loss; output error `T_j - O_j`.
    #[default]
    Softmax,
    /// Independent sigmoid outputs with squared-error loss; output error
    /// `O_j(1 - O_j)(T_j - O_j)`.
    SigmoidSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `outputs x inputs`; entry `(j, r)` is the weight from unit r into unit j.
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetModel {
    pub layers: Vec<Layer>,
    pub output: OutputMode,
    /// Mean training loss after the last epoch.
    pub final_loss: f64,
}

/// Outputs of every layer; `outputs[0]` is the input row itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub outputs: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("at least the input layer")
    }
}

/// Loss gradients, shaped like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

impl NetModel {
    /// Xavier-uniform weights in `±√(6/(fan_in+fan_out))`, zero biases.
    pub fn new(sizes: &[usize], output: OutputMode, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!(
                "network layer sizes {sizes:?} need an input and an output layer, all non-empty"
            )));
        }
        let mut rng = rng::seeded(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-r..=r))
                    .collect();
                Layer {
                    weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized"),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(NetModel {
            layers,
            output,
            final_loss: f64::NAN,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].weights.cols()];
        s.extend(self.layers.iter().map(|l| l.biases.len()));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").biases.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.biases.len())
            .sum()
    }

    /// `I_j = Σ_r w_rj O_r + φ_j` at every unit; hidden units apply the
    /// logistic function, the last layer softmax or sigmoid per `output`.
    pub fn forward(&self, x: &[f64]) -> Result<Activations> {
        check_dim(self.input_size(), x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition(
                "network input contains non-finite values".into(),
            ));
        }
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let prev = outputs.last().expect("input pushed");
            let net: Vec<f64> = layer
                .weights
                .iter_rows()
                .zip(&layer.biases)
                .map(|(w, b)| w.iter().zip(prev).map(|(a, o)| a * o).sum::<f64>() + b)
                .collect();
            let out = if k == last && self.output == OutputMode::Softmax {
                softmax(&net)
            } else {
                net.into_iter().map(sigmoid).collect()
            };
            outputs.push(out);
        }
        Ok(Activations { outputs })
    }

    /// Cross-entropy for softmax outputs, `½ Σ (T_j − O_j)²` for sigmoid outputs.
    pub fn loss(&self, output: &[f64], target: &[f64]) -> f64 {
        match self.output {
            OutputMode::Softmax => -target
                .iter()
                .zip(output)
                .map(|(t, o)| if *t > 0.0 { t * o.ln() } else { 0.0 })
                .sum::<f64>(),
            OutputMode::SigmoidSquared => {
                0.5 * target
                    .iter()
                    .zip(output)
                    .map(|(t, o)| (t - o).powi(2))
                    .sum::<f64>()
            }
        }
    }

    /// Error signals `Err_j` per non-input layer, output layer last.
    pub fn error_signals(&self, acts: &Activations, target: &[f64]) -> Result<Vec<Vec<f64>>> {
        if acts.outputs.len() != self.layers.len() + 1 {
            return Err(Error::Shape {
                expected: self.layers.len() + 1,
                got: acts.outputs.len(),
            });
        }
        check_dim(self.output_size(), target)?;
        let out = acts.output();
        let mut errs = vec![Vec::new(); self.layers.len()];
        let last = self.layers.len() - 1;
        errs[last] = match self.output {
            OutputMode::Softmax => target.iter().zip(out).map(|(t, o)| t - o).collect(),
            OutputMode::SigmoidSquared => target
                .iter()
                .zip(out)
                .map(|(t, o)| o * (1.0 - o) * (t - o))
                .collect(),
        };
        for k in (0..last).rev() {
            let o = &acts.outputs[k + 1];
            let next = &self.layers[k + 1];
            errs[k] = (0..o.len())
                .map(|j| {
                    let back: f64 = errs[k + 1]
                        .iter()
                        .enumerate()
                        .map(|(i, e)| e * next.weights.get(i, j))
                        .sum();
                    o[j] * (1.0 - o[j]) * back
                })
                .collect();
        }
        Ok(errs)
    }

    /// Loss gradients: `∂L/∂w_rj = −Err_j O_r`, `∂L/∂φ_j = −Err_j`. The
    /// learning rate is left to the optimizer.
    pub fn backward(&self, acts: &Activations, target: &[f64]) -> Result<Gradients> {
        let errs = self.error_signals(acts, target)?;
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for (k, err) in errs.iter().enumerate() {
            let input = &acts.outputs[k];
            let mut g = Matrix::zeros(err.len(), input.len());
            for (j, e) in err.iter().enumerate() {
                for (r, o) in input.iter().enumerate() {
                    g.set(j, r, -e * o);
                }
            }
            weights.push(g);
            biases.push(err.iter().map(|e| -e).collect());
        }
        Ok(Gradients { weights, biases })
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let (rows, cols) = (l.weights.rows(), l.weights.cols());
            l.weights = Matrix::from_vec(rows, cols, params[at..at + rows * cols].to_vec())?;
            at += rows * cols;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Class probabilities. Sigmoid outputs are renormalised to sum to one.
    pub fn predict_proba_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let acts = self.forward(x)?;
        let out = acts.output().to_vec();
        Ok(match self.output {
            OutputMode::Softmax => out,
            OutputMode::SigmoidSquared => {
                let z: f64 = out.iter().sum();
                out.iter().map(|o| o / z).collect()
            }
        })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        x.iter_rows().map(|r| self.predict_proba_row(r)).collect()
    }
}

impl Classifier for NetModel {
    fn n_classes(&self) -> usize {
        self.output_size()
    }

    fn feature_count(&self) -> usize {
        self.input_size()
    }

    fn predict_row(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba_row(x)?))
    }
}

pub(crate) fn one_hot(class: usize, n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n];
    t[class] = 1.0;
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn zeroed(sizes: &[usize], output: OutputMode) -> NetModel {
        let mut net = NetModel::new(sizes, output, 0).unwrap();
        let zeros = vec![0.0; net.param_count()];
        net.set_params_flat(&zeros).unwrap();
        net
    }

    #[test]
    fn zero_net_is_uniform() {
        let net = zeroed(&[3, 5, 4], OutputMode::Softmax);
        let acts = net.forward(&[0.3, -2.0, 7.0]).unwrap();
        assert!(acts.outputs[1].iter().all(|&o| o == 0.5));
        assert!(acts.output().iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_unit_sigmoid_at_zero() {
        let mut net = zeroed(&[1, 1, 1], OutputMode::SigmoidSquared);
        net.layers[0].weights.set(0, 0, 1.0);
        let acts = net.forward(&[0.0]).unwrap();
        assert_eq!(acts.outputs[1], vec![0.5]);
    }

    #[test]
    fn softmax_symmetry_and_sum() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, -1000.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigmoid_output_error_hand_computed() {
        // O = 0.8 from a logit of ln 4; T = 1  =>  0.8 * 0.2 * 0.2
        let mut net = zeroed(&[1, 1, 1], OutputMode::SigmoidSquared);
        net.layers[1].biases[0] = 4.0f64.ln();
        let acts = net.forward(&[0.0]).unwrap();
        assert_abs_diff_eq!(acts.output()[0], 0.8, epsilon = 1e-12);
        let errs = net.error_signals(&acts, &[1.0]).unwrap();
        assert_abs_diff_eq!(errs[1][0], 0.032, epsilon = 1e-12);
    }

    #[test]
    fn exact_target_has_zero_gradient() {
        let mut net = zeroed(&[2, 3, 1], OutputMode::SigmoidSquared);
        net.layers[0].weights.set(0, 0, 0.7);
        let acts = net.forward(&[1.0, -1.0]).unwrap();
        let target = acts.output().to_vec();
        let g = net.backward(&acts, &target).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_input_rejected() {
        let net = NetModel::new(&[2, 2, 2], OutputMode::Softmax, 1).unwrap();
        assert!(net.forward(&[f64::NAN, 0.0]).is_err());
        assert!(matches!(net.forward(&[0.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn init_bounds() {
        let net = NetModel::new(&[6, 16, 2], OutputMode::Softmax, 4).unwrap();
        let r0 = (6.0f64 / 22.0).sqrt();
        assert!(net.layers[0]
            .weights
            .as_slice()
            .iter()
            .all(|w| w.abs() <= r0));
        assert!(net
            .layers
            .iter()
            .all(|l| l.biases.iter().all(|&b| b == 0.0)));
        assert_eq!(net.sizes(), vec![6, 16, 2]);
    }

    #[test]
    fn uniform_output_ties_to_zero() {
        let net = zeroed(&[2, 2, 2], OutputMode::Softmax);
        assert_eq!(net.predict_row(&[1.0, 1.0]).unwrap(), 0);
    }

    proptest! {
        #[test]
        fn softmax_is_probability(logits in prop::collection::vec(-50.0f64..50.0, 1..8)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&v| v > 0.0));
        }

        #[test]
        fn cross_entropy_positive(seed in any::<u64>(), x in prop::collection::vec(-3.0f64..3.0, 3), c in 0usize..2) {
            let net = NetModel::new(&[3, 4, 2], OutputMode::Softmax, seed).unwrap();
            let acts = net.forward(&x).unwrap();
            prop_assert!(net.loss(acts.output(), &one_hot(c, 2)) > 0.0);
        }
    }
}
