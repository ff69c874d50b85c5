//! Gradients, Adam updates, negative sampling and the epoch loop.

use std::collections::HashSet;

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{MatchingGraphView, MatchingNode, ThetaKind};
use crate::model::{self, column_sums, forward_cached, ModelConfig, ModelParams};
use crate::network::{AnchorSet, Network, NodeId};
use crate::rng::rng_from;
use crate::sampler::{build_batch, Batch, SamplingConfig};

const STREAM_INIT: u64 = 1;
const STREAM_EPOCH: u64 = 2;
const STREAM_NEGATIVES: u64 = 3;

/// Mean loss of the batch and its exact gradient with respect to every
/// trainable parameter. The batch is taken as fixed.
pub fn loss_and_gradients(
    batch: &Batch,
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    labels: &[f64],
) -> Result<(f64, ModelParams)> {
    let (out, cache) = forward_cached(batch, params, view)?;
    let loss = model::loss(&out.probabilities, labels)?;
    let dlogit = Array1::from(model::loss_logit_grad(&out.probabilities, labels)?);

    let mut grads = params.zeros_like();
    grads.head_weight = out.embeddings.t().dot(&dlogit);
    if params.use_bias {
        grads.head_bias = dlogit.sum();
    }

    // dL/dh^K, one row per target.
    let mut dh: Array2<f64> = dlogit
        .view()
        .insert_axis(Axis(1))
        .dot(&params.head_weight.view().insert_axis(Axis(0)));

    for k in (1..=params.hops()).rev() {
        let c = &cache.layers[k - 1];
        let mut du = Array2::zeros(c.activation.raw_dim());
        for (i, mut du_row) in du.rows_mut().into_iter().enumerate() {
            let n = c.norms[i];
            if n == 0.0 {
                continue;
            }
            let h = c.output.row(i);
            let g = dh.row(i);
            let proj = h.dot(&g);
            let a = c.activation.row(i);
            for j in 0..du_row.len() {
                // Jacobian of x / |x| followed by the sigmoid derivative.
                let ds = (g[j] - h[j] * proj) / n;
                du_row[j] = ds * a[j] * (1.0 - a[j]);
            }
        }
        let layer = &params.layers[k - 1];
        grads.layers[k - 1].weight = du.t().dot(&c.input);
        if params.use_bias {
            grads.layers[k - 1].bias = column_sums(&du);
        }
        if k > 1 {
            let d = layer.weight.ncols() / 2;
            let dx = du.dot(&layer.weight);
            let mut dprev = Array2::zeros((batch.layer(k - 1).len(), d));
            for i in 0..dx.nrows() {
                let row = dx.row(i);
                {
                    let mut target = dprev.row_mut(i);
                    target += &row.slice(s![..d]);
                }
                let nbrs = batch.sampled(k, i);
                if !nbrs.is_empty() {
                    let share = &row.slice(s![d..]) / nbrs.len() as f64;
                    for &j in nbrs {
                        let mut target = dprev.row_mut(j);
                        target += &share;
                    }
                }
            }
            dh = dprev;
        }
    }

    for (name, t) in grads.tensors() {
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
    }
    Ok((loss, grads))
}

/// Gradient of the mean loss with respect to every parameter.
pub fn backward(
    batch: &Batch,
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    labels: &[f64],
) -> Result<ModelParams> {
    loss_and_gradients(batch, params, view, labels).map(|(_, g)| g)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

fn same_shapes(a: &ModelParams, b: &ModelParams) -> bool {
    let (ta, tb) = (a.tensors(), b.tensors());
    ta.len() == tb.len()
        && ta
            .iter()
            .zip(&tb)
            .all(|((na, xa), (nb, xb))| na == nb && xa.len() == xb.len())
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if !same_shapes(params, grads)
        || !same_shapes(params, &state.m)
        || !same_shapes(params, &state.v)
    {
        return Err(Error::invalid(
            "parameter, gradient and optimizer shapes differ",
        ));
    }
    state.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    let g = grads.tensors();
    let p = params.tensors_mut();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for ((((_, p), (_, g)), (_, m)), (_, v)) in p.into_iter().zip(g).zip(m).zip(v) {
        for i in 0..p.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Which target nodes negatives may be drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativePool {
    /// Any target node except the true partner.
    #[default]
    AllTargets,
    /// Only target nodes that are not anchored in the training set.
    NonAnchorTargets,
}

/// `ceil(ratio * |anchors|)` corrupted pairs `(s, t')`, cycling over the
/// anchored sources, with `t'` uniform over the target nodes. The true pair
/// and repeats within the draw are rejected.
pub fn sample_negatives<R: Rng + ?Sized>(
    train_anchors: &AnchorSet,
    source: &Network,
    target: &Network,
    ratio: f64,
    rng: &mut R,
) -> Result<Vec<MatchingNode>> {
    train_anchors.validate(source, target)?;
    let pool: Vec<NodeId> = (0..target.node_count()).collect();
    draw_negatives(train_anchors, &pool, ratio, rng)
}

/// Like [`sample_negatives`] with `t'` restricted to `pool`.
pub fn draw_negatives<R: Rng + ?Sized>(
    train_anchors: &AnchorSet,
    pool: &[NodeId],
    ratio: f64,
    rng: &mut R,
) -> Result<Vec<MatchingNode>> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::invalid(format!(
            "negative ratio {ratio} must be positive"
        )));
    }
    let pairs = train_anchors.pairs();
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let count = (ratio * pairs.len() as f64 - 1e-9).ceil() as usize;
    let pool_set: HashSet<NodeId> = pool.iter().copied().collect();
    let mut used: HashSet<MatchingNode> = HashSet::with_capacity(count);
    let mut used_per_source: std::collections::HashMap<NodeId, usize> = Default::default();
    let mut out = Vec::with_capacity(count);
    let mut skipped = 0usize;
    for i in 0..count {
        let (s, t) = pairs[i % pairs.len()];
        let taken = used_per_source.get(&s).copied().unwrap_or(0);
        let available = pool_set.len() - usize::from(pool_set.contains(&t)) - taken;
        if available == 0 {
            skipped += 1;
            continue;
        }
        let mut pick = None;
        for _ in 0..64 {
            let cand = MatchingNode::new(s, pool[rng.random_range(0..pool.len())]);
            if cand.t != t && !used.contains(&cand) {
                pick = Some(cand);
                break;
            }
        }
        let pick = pick.unwrap_or_else(|| {
            let open: Vec<MatchingNode> = pool
                .iter()
                .map(|&c| MatchingNode::new(s, c))
                .filter(|c| c.t != t && !used.contains(c))
                .collect();
            open[rng.random_range(0..open.len())]
        });
        used.insert(pick);
        *used_per_source.entry(s).or_default() += 1;
        out.push(pick);
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} negatives: no admissible target left for their source");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Negatives per positive.
    pub neg_ratio: f64,
    pub sampling: SamplingConfig,
    pub seed: u64,
    pub theta: ThetaKind,
    /// Output dimension of every convolution layer.
    pub embed_dim: usize,
    pub use_bias: bool,
    /// Draw a fresh negative set every epoch instead of one fixed set.
    pub resample_negatives: bool,
    pub negative_pool: NegativePool,
    /// Stop once the loss improved by less than this over `early_stop_window` epochs.
    pub early_stop_tol: f64,
    pub early_stop_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 128,
            epochs: 100,
            neg_ratio: 1.0,
            sampling: SamplingConfig::default(),
            seed: 0,
            theta: ThetaKind::CosineScalar,
            embed_dim: 128,
            use_bias: true,
            resample_negatives: true,
            negative_pool: NegativePool::AllTargets,
            early_stop_tol: 1e-5,
            early_stop_window: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.neg_ratio > 0.0 && self.neg_ratio.is_finite()) {
            return Err(Error::invalid("negative ratio must be positive"));
        }
        if self.embed_dim == 0 {
            return Err(Error::invalid("embedding size must be at least 1"));
        }
        self.sampling.validate()
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden_dims: vec![self.embed_dim; self.sampling.hops()],
            use_bias: self.use_bias,
        }
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    pub loss_history: Vec<f64>,
}

impl TrainState {
    pub fn new(view: &MatchingGraphView<'_>, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from(cfg.seed, &[STREAM_INIT]);
        let params = ModelParams::init(&cfg.model_config(view.feature_dim()), &mut rng)?;
        let adam = AdamState::new(&params);
        Ok(Self {
            params,
            adam,
            epoch: 0,
            loss_history: Vec::new(),
        })
    }

    /// True once the loss stopped improving by at least `tol` over `window` epochs.
    pub fn converged(&self, tol: f64, window: usize) -> bool {
        let h = &self.loss_history;
        window > 0 && h.len() > window && h[h.len() - 1 - window] - h[h.len() - 1] < tol
    }
}

/// Runs one pass over `examples` in shuffled batches; returns the mean loss.
pub fn train_epoch<R: Rng + ?Sized>(
    state: &mut TrainState,
    view: &MatchingGraphView<'_>,
    examples: &mut [(MatchingNode, f64)],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::invalid("no training examples"));
    }
    examples.shuffle(rng);
    let mut total = 0.0;
    for chunk in examples.chunks(cfg.batch_size) {
        total += train_step(state, view, chunk, cfg, rng)?.0 * chunk.len() as f64;
    }
    Ok(total / examples.len() as f64)
}

/// Samples a batch for `examples`, then applies one optimizer update.
/// Returns the batch loss and the batch that was used.
pub fn train_step<R: Rng + ?Sized>(
    state: &mut TrainState,
    view: &MatchingGraphView<'_>,
    examples: &[(MatchingNode, f64)],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(f64, Batch)> {
    let targets: Vec<MatchingNode> = examples.iter().map(|e| e.0).collect();
    let labels: Vec<f64> = examples.iter().map(|e| e.1).collect();
    let batch = build_batch(&targets, view, &cfg.sampling, rng)?;
    let (loss, grads) = loss_and_gradients(&batch, &state.params, view, &labels)?;
    adam_step(
        &mut state.params,
        &grads,
        &mut state.adam,
        cfg.learning_rate,
    )?;
    Ok((loss, batch))
}

fn negatives_for_epoch(
    view: &MatchingGraphView<'_>,
    train_anchors: &AnchorSet,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<Vec<MatchingNode>> {
    let mut rng = if cfg.resample_negatives {
        rng_from(cfg.seed, &[STREAM_NEGATIVES, epoch as u64])
    } else {
        rng_from(cfg.seed, &[STREAM_NEGATIVES])
    };
    match cfg.negative_pool {
        NegativePool::AllTargets => sample_negatives(
            train_anchors,
            view.source(),
            view.target(),
            cfg.neg_ratio,
            &mut rng,
        ),
        NegativePool::NonAnchorTargets => {
            let anchored = train_anchors.targets();
            let pool: Vec<NodeId> = (0..view.target().node_count())
                .filter(|t| !anchored.contains(t))
                .collect();
            if pool.is_empty() {
                return Err(Error::invalid("every target node is anchored"));
            }
            draw_negatives(train_anchors, &pool, cfg.neg_ratio, &mut rng)
        }
    }
}

/// Labeled examples of one epoch: every training anchor as a positive, then
/// that epoch's negatives.
pub fn epoch_examples(
    view: &MatchingGraphView<'_>,
    train_anchors: &AnchorSet,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<Vec<(MatchingNode, f64)>> {
    let mut examples: Vec<(MatchingNode, f64)> = train_anchors
        .pairs()
        .iter()
        .map(|&(s, t)| (MatchingNode::new(s, t), 1.0))
        .collect();
    examples.extend(
        negatives_for_epoch(view, train_anchors, cfg, epoch)?
            .into_iter()
            .map(|m| (m, 0.0)),
    );
    Ok(examples)
}

/// Continues training from `state` until `cfg.epochs` epochs are done or the
/// loss stalls. `on_epoch` runs after every completed epoch.
pub fn train_from(
    mut state: TrainState,
    view: &MatchingGraphView<'_>,
    train_anchors: &AnchorSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&TrainState) -> Result<()>,
) -> Result<TrainState> {
    cfg.validate()?;
    train_anchors.validate(view.source(), view.target())?;
    if state.params.hops() != cfg.sampling.hops() {
        return Err(Error::invalid(
            "checkpoint and configuration disagree on the number of hops",
        ));
    }
    while state.epoch < cfg.epochs {
        if state.converged(cfg.early_stop_tol, cfg.early_stop_window) {
            log::info!("loss stalled after {} epochs", state.epoch);
            break;
        }
        let mut examples = epoch_examples(view, train_anchors, cfg, state.epoch)?;
        let mut rng = rng_from(cfg.seed, &[STREAM_EPOCH, state.epoch as u64]);
        let loss = train_epoch(&mut state, view, &mut examples, cfg, &mut rng)?;
        state.epoch += 1;
        state.loss_history.push(loss);
        log::debug!("epoch {} loss {loss:.6}", state.epoch);
        on_epoch(&state)?;
    }
    Ok(state)
}

/// Trains a fresh model on the training anchors only.
pub fn train(
    source: &Network,
    target: &Network,
    train_anchors: &AnchorSet,
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    let view = MatchingGraphView::new(source, target, cfg.theta)?;
    let state = TrainState::new(&view, cfg)?;
    let state = train_from(state, &view, train_anchors, cfg, |_| Ok(()))?;
    Ok((state.params, state.loss_history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_params(seed: u64) -> ModelParams {
        ModelParams::init(
            &ModelConfig {
                input_dim: 2,
                hidden_dims: vec![3],
                use_bias: true,
            },
            &mut rng_from(seed, &[]),
        )
        .unwrap()
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = small_params(1);
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 0.01).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = small_params(2);
        let before = p.clone();
        let mut g = p.zeros_like();
        for (_, t) in g.tensors_mut() {
            for (i, x) in t.iter_mut().enumerate() {
                *x = if i % 2 == 0 { 0.3 } else { -2.0 };
            }
        }
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 0.01).unwrap();
        for (((_, a), (_, b)), (_, gr)) in p.tensors().iter().zip(before.tensors()).zip(g.tensors())
        {
            for i in 0..a.len() {
                // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
                let expected = -0.01 * gr[i] / (gr[i].abs() + ADAM_EPS);
                assert_abs_diff_eq!(a[i] - b[i], expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut p = small_params(1);
        let other = ModelParams::init(
            &ModelConfig {
                input_dim: 2,
                hidden_dims: vec![4],
                use_bias: true,
            },
            &mut rng_from(0, &[]),
        )
        .unwrap();
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &other, &mut st, 0.01).is_err());
    }

    fn net(n: usize) -> Network {
        Network::from_edges(&[], vec![vec![1.0]; n]).unwrap()
    }

    #[test]
    fn negative_counts_and_exclusion() {
        let (s, t) = (net(100), net(150));
        let anchors = AnchorSet::new((0..100).map(|i| (i, i)).collect()).unwrap();
        let mut rng = rng_from(0, &[]);
        let negs = sample_negatives(&anchors, &s, &t, 1.0, &mut rng).unwrap();
        assert_eq!(negs.len(), 100);
        assert!(negs.iter().all(|m| !anchors.contains((m.s, m.t))));
        let negs = sample_negatives(&anchors, &s, &t, 2.0, &mut rng).unwrap();
        assert_eq!(negs.len(), 200);
        let distinct: HashSet<_> = negs.iter().collect();
        assert_eq!(distinct.len(), 200);
    }

    #[test]
    fn forced_negative() {
        let anchors = AnchorSet::new(vec![(0, 0)]).unwrap();
        let negs =
            sample_negatives(&anchors, &net(1), &net(2), 1.0, &mut rng_from(4, &[])).unwrap();
        assert_eq!(negs, vec![MatchingNode::new(0, 1)]);
    }

    #[test]
    fn impossible_negative_is_skipped() {
        let anchors = AnchorSet::new(vec![(0, 0)]).unwrap();
        let negs =
            sample_negatives(&anchors, &net(1), &net(1), 1.0, &mut rng_from(4, &[])).unwrap();
        assert!(negs.is_empty());
        // two admissible targets, three requested: one is skipped
        let negs =
            sample_negatives(&anchors, &net(1), &net(3), 3.0, &mut rng_from(4, &[])).unwrap();
        assert_eq!(negs.len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            neg_ratio: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn converged_window() {
        let mut st = TrainState {
            params: small_params(0),
            adam: AdamState::new(&small_params(0)),
            epoch: 0,
            loss_history: vec![1.0; 11],
        };
        assert!(st.converged(1e-5, 10));
        st.loss_history[0] = 2.0;
        assert!(!st.converged(1e-5, 10));
        assert!(!st.converged(1e-5, 0));
    }
}
