//! Full-batch training of attention networks for node classification.
//!
//! Gradients are computed exactly by a hand-written backward pass (see
//! [`loss_and_grads`]); [`finite_diff_check`] compares them against central
//! differences. Training always runs on the self-looped graph.

mod backward;

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use backward::{finite_diff_check, loss_and_grads, GRAD_CHECK_FLOOR};

use crate::datasets::DatasetBundle;
use crate::dense::Matrix;
use crate::engine::{argmax, Activation, GatModel, HeadMerge, HeadParams, LayerParams};
use crate::error::{Error, Result};
use crate::graph::NodeId;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Random model with the given widths. `layer_sizes` is
/// `[input, hidden.., classes]` and `heads_per_layer` has one entry per layer.
/// Hidden layers concatenate their heads (so the next layer sees
/// `size * heads` features) and apply ELU; the last layer averages heads.
/// Every parameter is drawn from `U(-1, 1) * init_scale / sqrt(fan_in)`.
pub fn init_model(
    seed: u64,
    layer_sizes: &[usize],
    heads_per_layer: &[usize],
    init_scale: f64,
) -> Result<GatModel> {
    if layer_sizes.len() < 2 {
        return Err(Error::Validation("need at least an input and an output size".into()));
    }
    let num_layers = layer_sizes.len() - 1;
    if heads_per_layer.len() != num_layers {
        return Err(Error::Validation(format!(
            "{num_layers} layers but {} head counts",
            heads_per_layer.len()
        )));
    }
    if layer_sizes.contains(&0) || heads_per_layer.contains(&0) {
        return Err(Error::Validation("layer sizes and head counts must be positive".into()));
    }
    if !(init_scale.is_finite() && init_scale >= 0.0) {
        return Err(Error::Validation(format!("init_scale must be finite and non-negative, got {init_scale}")));
    }
    let mut rng = crate::datasets::component_rng(seed, 2);
    let mut draw = |fan_in: usize| init_scale / (fan_in as f64).sqrt() * rng.random_range(-1.0..1.0);
    let mut layers = Vec::with_capacity(num_layers);
    let mut in_dim = layer_sizes[0];
    for l in 0..num_layers {
        let out = layer_sizes[l + 1];
        let last = l + 1 == num_layers;
        let heads = (0..heads_per_layer[l])
            .map(|_| HeadParams {
                weight: Matrix::from_fn(in_dim, out, |_, _| draw(in_dim)),
                att_src: (0..out).map(|_| draw(out)).collect(),
                att_dst: (0..out).map(|_| draw(out)).collect(),
            })
            .collect();
        let (head_merge, activation) = if last {
            (HeadMerge::Average, Activation::Identity)
        } else {
            (HeadMerge::Concat, Activation::Elu)
        };
        layers.push(LayerParams {
            heads,
            leaky_slope: LEAKY_SLOPE,
            head_merge,
            activation,
        });
        in_dim = out * heads_per_layer[l];
    }
    GatModel::new(layers)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Plain gradient descent.
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            l2_weight: 5e-4,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            init_scale: 3f64.sqrt(),
        }
    }
}

impl TrainConfig {
    fn check(&self) -> Result<()> {
        let finite = [self.learning_rate, self.l2_weight, self.beta1, self.beta2, self.epsilon];
        if finite.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Validation(
                "learning rate, l2 weight and optimizer constants must be finite and non-negative".into(),
            ));
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::Validation("beta1 and beta2 must be below 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch record, measured before that epoch's update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,loss,train_acc,val_acc")?;
        for e in &self.epochs {
            writeln!(out, "{},{},{},{}", e.epoch, e.loss, e.train_acc, e.val_acc)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Fraction of `nodes` whose predicted class equals the label. Empty sets
/// score 0.
pub fn accuracy(logits: &Matrix, labels: &[usize], nodes: &[NodeId]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().filter(|&&v| argmax(logits.row(v)) == labels[v]).count();
    hits as f64 / nodes.len() as f64
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Trains `model` on the bundle's training split and returns the final model
/// (after the last update) with its trace.
pub fn train(model: &GatModel, bundle: &DatasetBundle, cfg: &TrainConfig) -> Result<(GatModel, TrainTrace)> {
    cfg.check()?;
    let graph = bundle.graph().add_self_loops();
    let labels = graph
        .labels()
        .ok_or_else(|| Error::MissingLabels("dataset has no labels".into()))?
        .to_vec();
    let split = bundle.split();
    let mut params = model.to_flat();
    let mut current = model.clone();
    let mut adam = AdamState {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.epochs {
        let eval = backward::evaluate(&current, &graph, &split.train, cfg.l2_weight)?;
        if !eval.loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss: eval.loss });
        }
        trace.epochs.push(EpochStats {
            epoch,
            loss: eval.loss,
            train_acc: accuracy(&eval.logits, &labels, &split.train),
            val_acc: accuracy(&eval.logits, &labels, &split.val),
        });
        let grads = eval.grads.to_flat();
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(&grads) {
                    *p -= cfg.learning_rate * g;
                }
            }
            Optimizer::Adam => {
                adam.t += 1;
                let c1 = 1.0 - cfg.beta1.powi(adam.t);
                let c2 = 1.0 - cfg.beta2.powi(adam.t);
                for k in 0..params.len() {
                    let g = grads[k];
                    adam.m[k] = cfg.beta1 * adam.m[k] + (1.0 - cfg.beta1) * g;
                    adam.v[k] = cfg.beta2 * adam.v[k] + (1.0 - cfg.beta2) * g * g;
                    let m_hat = adam.m[k] / c1;
                    let v_hat = adam.v[k] / c2;
                    params[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
                }
            }
        }
        current = current.with_flat(&params).map_err(|_| Error::NonFiniteLoss {
            epoch,
            loss: f64::NAN,
        })?;
    }
    Ok((current, trace))
}
