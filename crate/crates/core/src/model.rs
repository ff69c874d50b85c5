//! Forward pass of the matching-graph convolution model.
//!
//! Layer `k` maps every node of `B^k` to
//! `normalize(sigmoid(W_k [h_self ; mean(h_sampled)] + b_k))`, reading the
//! previous layer's representations. Layer 0 is the θ feature of each
//! matching node. A logistic head turns the final embedding into the
//! probability that the pair is an anchor link.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::MatchingGraphView;
use crate::sampler::Batch;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scales `v` to unit L2 norm in place and returns the original norm.
/// A zero vector stays zero.
pub fn l2_normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Element-wise mean; the zero vector of length `dim` when empty.
pub fn aggregate_mean(vectors: &[&[f64]], dim: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += x);
    }
    if !vectors.is_empty() {
        let n = vectors.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }
    Ok(out)
}

/// One convolution step for a single node.
pub fn layer_forward(
    h_self: &[f64],
    h_nbr: &[f64],
    weight: &Array2<f64>,
    bias: &Array1<f64>,
) -> Result<Vec<f64>> {
    if h_self.len() != h_nbr.len() {
        return Err(Error::DimensionMismatch {
            expected: h_self.len(),
            got: h_nbr.len(),
        });
    }
    if weight.ncols() != 2 * h_self.len() {
        return Err(Error::DimensionMismatch {
            expected: weight.ncols(),
            got: 2 * h_self.len(),
        });
    }
    if bias.len() != weight.nrows() {
        return Err(Error::DimensionMismatch {
            expected: weight.nrows(),
            got: bias.len(),
        });
    }
    let input: Array1<f64> = h_self.iter().chain(h_nbr).copied().collect();
    let pre = weight.dot(&input) + bias;
    if pre.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("layer pre-activation".into()));
    }
    let mut out: Vec<f64> = pre.iter().map(|&x| sigmoid(x)).collect();
    l2_normalize(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// θ output dimension.
    pub input_dim: usize,
    /// Output dimension of each layer; its length is the number of hops.
    pub hidden_dims: Vec<usize>,
    pub use_bias: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `d_k x 2 d_{k-1}`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub head_weight: Array1<f64>,
    pub head_bias: f64,
    /// When false the biases stay at zero and are not trained.
    pub use_bias: bool,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        if cfg.input_dim == 0 || cfg.hidden_dims.is_empty() || cfg.hidden_dims.contains(&0) {
            return Err(Error::invalid(
                "model dimensions must be positive and hops >= 1",
            ));
        }
        let mut glorot = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
        };
        let mut layers = Vec::with_capacity(cfg.hidden_dims.len());
        let mut d_in = cfg.input_dim;
        for &d_out in &cfg.hidden_dims {
            layers.push(Layer {
                weight: glorot(d_out, 2 * d_in, 2 * d_in, d_out),
                bias: Array1::zeros(d_out),
            });
            d_in = d_out;
        }
        let head = glorot(1, d_in, d_in, 1);
        Ok(Self {
            layers,
            head_weight: head.row(0).to_owned(),
            head_bias: 0.0,
            use_bias: cfg.use_bias,
        })
    }

    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        if cfg.input_dim == 0 || cfg.hidden_dims.is_empty() || cfg.hidden_dims.contains(&0) {
            return Err(Error::invalid(
                "model dimensions must be positive and hops >= 1",
            ));
        }
        let mut layers = Vec::with_capacity(cfg.hidden_dims.len());
        let mut d_in = cfg.input_dim;
        for &d_out in &cfg.hidden_dims {
            layers.push(Layer {
                weight: Array2::zeros((d_out, 2 * d_in)),
                bias: Array1::zeros(d_out),
            });
            d_in = d_out;
        }
        Ok(Self {
            layers,
            head_weight: Array1::zeros(d_in),
            head_bias: 0.0,
            use_bias: cfg.use_bias,
        })
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            head_weight: Array1::zeros(self.head_weight.len()),
            head_bias: 0.0,
            use_bias: self.use_bias,
        }
    }

    pub fn hops(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols() / 2
    }

    pub fn embedding_dim(&self) -> usize {
        self.head_weight.len()
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            input_dim: self.input_dim(),
            hidden_dims: self.layers.iter().map(|l| l.weight.nrows()).collect(),
            use_bias: self.use_bias,
        }
    }

    /// Trainable tensors by name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for (k, layer) in self.layers.iter().enumerate() {
            out.push((
                format!("layer{}.weight", k + 1),
                layer.weight.as_slice().expect("standard layout"),
            ));
            if self.use_bias {
                out.push((
                    format!("layer{}.bias", k + 1),
                    layer.bias.as_slice().expect("standard layout"),
                ));
            }
        }
        out.push((
            "head.weight".into(),
            self.head_weight.as_slice().expect("standard layout"),
        ));
        if self.use_bias {
            out.push(("head.bias".into(), std::slice::from_ref(&self.head_bias)));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let use_bias = self.use_bias;
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for (k, layer) in self.layers.iter_mut().enumerate() {
            out.push((
                format!("layer{}.weight", k + 1),
                layer.weight.as_slice_mut().expect("standard layout"),
            ));
            if use_bias {
                out.push((
                    format!("layer{}.bias", k + 1),
                    layer.bias.as_slice_mut().expect("standard layout"),
                ));
            }
        }
        out.push((
            "head.weight".into(),
            self.head_weight.as_slice_mut().expect("standard layout"),
        ));
        if use_bias {
            out.push((
                "head.bias".into(),
                std::slice::from_mut(&mut self.head_bias),
            ));
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// Final embeddings and head outputs for the targets of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// One unit-norm row per node of `B^K`.
    pub embeddings: Array2<f64>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

pub(crate) struct LayerCache {
    /// `[h_self ; h_nbr]` rows, `n_k x 2 d_{k-1}`.
    pub input: Array2<f64>,
    /// Sigmoid outputs before normalization.
    pub activation: Array2<f64>,
    pub norms: Vec<f64>,
    /// Normalized outputs `h^k`.
    pub output: Array2<f64>,
}

pub(crate) struct ForwardCache {
    pub layers: Vec<LayerCache>,
}

/// Layer-0 features for every node of `B^0`.
pub fn input_features(batch: &Batch, view: &MatchingGraphView<'_>) -> Array2<f64> {
    let nodes = batch.layer(0);
    let mut h0 = Array2::zeros((nodes.len(), view.feature_dim()));
    for (mut row, &m) in h0.rows_mut().into_iter().zip(nodes) {
        view.features_into(m, row.as_slice_mut().expect("standard layout"));
    }
    h0
}

pub fn forward(
    batch: &Batch,
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
) -> Result<ForwardOutput> {
    forward_cached(batch, params, view).map(|(out, _)| out)
}

pub(crate) fn forward_cached(
    batch: &Batch,
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
) -> Result<(ForwardOutput, ForwardCache)> {
    if batch.hops() != params.hops() {
        return Err(Error::invalid(format!(
            "batch has {} hops but the model has {}",
            batch.hops(),
            params.hops()
        )));
    }
    if view.feature_dim() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            got: view.feature_dim(),
        });
    }
    let mut prev = input_features(batch, view);
    let mut caches = Vec::with_capacity(params.hops());
    for (k, layer) in (1..=params.hops()).zip(&params.layers) {
        let d = prev.ncols();
        let n = batch.layer(k).len();
        let mut input = Array2::zeros((n, 2 * d));
        for i in 0..n {
            let mut row = input.row_mut(i);
            row.slice_mut(s![..d]).assign(&prev.row(i));
            let nbrs = batch.sampled(k, i);
            if !nbrs.is_empty() {
                let mut agg = row.slice_mut(s![d..]);
                for &j in nbrs {
                    agg += &prev.row(j);
                }
                agg /= nbrs.len() as f64;
            }
        }
        let mut activation = input.dot(&layer.weight.t());
        if params.use_bias {
            activation += &layer.bias;
        }
        if activation.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("layer{k} pre-activation")));
        }
        activation.mapv_inplace(sigmoid);
        let mut output = activation.clone();
        let norms: Vec<f64> = output
            .rows_mut()
            .into_iter()
            .map(|mut r| l2_normalize(r.as_slice_mut().expect("standard layout")))
            .collect();
        caches.push(LayerCache {
            input,
            activation,
            norms,
            output: output.clone(),
        });
        prev = output;
    }
    let head_bias = if params.use_bias {
        params.head_bias
    } else {
        0.0
    };
    let logits: Vec<f64> = prev
        .dot(&params.head_weight)
        .iter()
        .map(|z| z + head_bias)
        .collect();
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("head logits".into()));
    }
    let probabilities = logits.iter().map(|&z| sigmoid(z)).collect();
    Ok((
        ForwardOutput {
            embeddings: prev,
            logits,
            probabilities,
        },
        ForwardCache { layers: caches },
    ))
}

fn check_labels(probs: &[f64], labels: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::invalid("loss of an empty batch"));
    }
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: labels.len(),
        });
    }
    if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::invalid(format!("label {y} is not 0 or 1")));
    }
    Ok(())
}

/// Mean binary cross-entropy with clamped probabilities.
pub fn loss(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    check_labels(probabilities, labels)?;
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / probabilities.len() as f64)
}

/// dL/dlogit for each example of the mean clamped cross-entropy.
pub(crate) fn loss_logit_grad(probabilities: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    check_labels(probabilities, labels)?;
    let n = probabilities.len() as f64;
    Ok(probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                0.0
            } else {
                (p - y) / n
            }
        })
        .collect())
}

/// Head probability for one embedding.
pub fn predict(params: &ModelParams, z: ArrayView1<'_, f64>) -> f64 {
    let b = if params.use_bias {
        params.head_bias
    } else {
        0.0
    };
    sigmoid(z.dot(&params.head_weight) + b)
}

/// Sum over the rows of `a`.
pub(crate) fn column_sums(a: &Array2<f64>) -> Array1<f64> {
    a.sum_axis(Axis(0))
}
