//! Layered mini-batch construction over the matching graph.
//!
//! Starting from the target matching nodes `B^K`, each earlier layer
//! `B^{k-1}` is the previous layer plus a fixed number of bootstrap-sampled
//! matching neighbors of every node in it. The per-node samples are recorded
//! so aggregation only ever reads nodes that are present in the batch.
//!
//! Each node's samples are drawn from an RNG seeded by the layer seed and the
//! node itself, so a node's neighborhood draw does not depend on where it sits
//! in the batch or which other nodes share the batch.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{MatchingGraphView, MatchingNode};
use crate::rng;

/// Floor applied to feature-importance weights.
pub const IMPORTANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    #[default]
    Random,
    /// Neighbors drawn proportionally to their attribute cosine.
    #[serde(rename = "feature")]
    FeatureImportance,
}

impl FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "feature" => Ok(Self::FeatureImportance),
            other => Err(Error::invalid(format!(
                "unknown sampling strategy {other:?} (expected random or feature)"
            ))),
        }
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::FeatureImportance => "feature",
        })
    }
}

/// Fan-outs per convolution layer. `fanouts[k - 1]` is the number of
/// neighbors sampled for every node of `B^k`, so the last entry applies to
/// the targets themselves (their 1-hop neighbors).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub fanouts: Vec<usize>,
    pub strategy: SamplingStrategy,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            fanouts: default_fanouts(2),
            strategy: SamplingStrategy::Random,
            seed: 0,
        }
    }
}

/// 10 neighbors per inner layer and 5 for the 1-hop layer.
pub fn default_fanouts(hops: usize) -> Vec<usize> {
    let mut f = vec![10; hops.saturating_sub(1)];
    if hops > 0 {
        f.push(5);
    }
    f
}

impl SamplingConfig {
    pub fn hops(&self) -> usize {
        self.fanouts.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.fanouts.is_empty() {
            return Err(Error::invalid("at least one hop is required"));
        }
        if self.fanouts.contains(&0) {
            return Err(Error::invalid("fan-outs must be positive"));
        }
        Ok(())
    }

    /// Upper bound on `|B^0|` for a batch of `targets` nodes.
    pub fn max_batch_nodes(&self, targets: usize) -> usize {
        self.fanouts.iter().fold(targets, |n, &q| n * (1 + q))
    }
}

/// Draws `q` neighbors with replacement, uniformly or proportionally to
/// `weights`. Returns an empty list when there are no candidates.
pub fn sample_neighbors<R: Rng + ?Sized>(
    candidates: &[MatchingNode],
    q: usize,
    weights: Option<&[f64]>,
    rng: &mut R,
) -> Result<Vec<MatchingNode>> {
    if q == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let idx = sample_indices(candidates.len(), q, weights, rng)?;
    Ok(idx.into_iter().map(|i| candidates[i]).collect())
}

fn sample_indices<R: Rng + ?Sized>(
    len: usize,
    q: usize,
    weights: Option<&[f64]>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if let Some(w) = weights {
        if w.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: w.len(),
            });
        }
        if let Some(bad) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::invalid(format!("invalid sampling weight {bad}")));
        }
        if w.iter().any(|&x| x > 0.0) {
            let dist = WeightedIndex::new(w).map_err(|e| Error::invalid(e.to_string()))?;
            return Ok((0..q).map(|_| dist.sample(rng)).collect());
        }
    }
    Ok((0..q).map(|_| rng.random_range(0..len)).collect())
}

/// Samples `q` matching neighbors of one node with its own seeded RNG.
fn sample_for_node(
    view: &MatchingGraphView<'_>,
    m: MatchingNode,
    q: usize,
    strategy: SamplingStrategy,
    layer_seed: u64,
) -> Vec<MatchingNode> {
    let count = view.neighbor_count(m);
    if count == 0 {
        return Vec::new();
    }
    let mut rng = rng::rng_from(layer_seed, &[m.s as u64, m.t as u64]);
    match strategy {
        // Uniform over N(s) x N(t) without building the product.
        SamplingStrategy::Random => (0..q)
            .map(|_| view.neighbor_at(m, rng.random_range(0..count)))
            .collect(),
        SamplingStrategy::FeatureImportance => {
            let candidates: Vec<MatchingNode> =
                (0..count).map(|i| view.neighbor_at(m, i)).collect();
            let weights: Vec<f64> = candidates
                .iter()
                .map(|&c| view.attribute_cosine(c).max(IMPORTANCE_FLOOR))
                .collect();
            sample_neighbors(&candidates, q, Some(&weights), &mut rng)
                .expect("weights are floored and finite")
        }
    }
}

/// One expansion step: every frontier node keeps its position and gets `q`
/// sampled neighbors, appended to the next layer when not already present.
/// Returns the next layer and, per frontier node, indices into it.
pub fn batch_sampling<R: Rng + ?Sized>(
    frontier: &[MatchingNode],
    view: &MatchingGraphView<'_>,
    q: usize,
    strategy: SamplingStrategy,
    rng: &mut R,
) -> Result<(Vec<MatchingNode>, Vec<Vec<usize>>)> {
    if frontier.is_empty() {
        return Err(Error::invalid("frontier must be non-empty"));
    }
    if q == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    for &m in frontier {
        view.check(m)?;
    }
    let layer_seed: u64 = rng.random();
    let mut next: Vec<MatchingNode> = frontier.to_vec();
    let mut position: HashMap<MatchingNode, usize> =
        HashMap::with_capacity(frontier.len() * (q + 1));
    for (i, &m) in frontier.iter().enumerate() {
        position.entry(m).or_insert(i);
    }
    let mut adj = Vec::with_capacity(frontier.len());
    for &m in frontier {
        let sampled = sample_for_node(view, m, q, strategy, layer_seed);
        let idx = sampled
            .into_iter()
            .map(|nb| {
                *position.entry(nb).or_insert_with(|| {
                    next.push(nb);
                    next.len() - 1
                })
            })
            .collect();
        adj.push(idx);
    }
    Ok((next, adj))
}

/// Layered batch `B^0 .. B^K`.
///
/// `B^{k-1}` starts with `B^k` verbatim, so node `i` of layer `k` is also
/// node `i` of layer `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    layers: Vec<Vec<MatchingNode>>,
    sampled: Vec<Vec<Vec<usize>>>,
}

impl Batch {
    pub fn hops(&self) -> usize {
        self.layers.len() - 1
    }

    /// Nodes of `B^k`.
    pub fn layer(&self, k: usize) -> &[MatchingNode] {
        &self.layers[k]
    }

    pub fn targets(&self) -> &[MatchingNode] {
        &self.layers[self.hops()]
    }

    /// Sampled neighbors of node `i` of `B^k` (`k >= 1`) as indices into `B^{k-1}`.
    pub fn sampled(&self, k: usize, i: usize) -> &[usize] {
        &self.sampled[k - 1][i]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn stats(&self) -> BatchStats {
        BatchStats {
            layer_sizes: self.layer_sizes(),
            sampled_edges: self
                .sampled
                .iter()
                .map(|l| l.iter().map(Vec::len).sum())
                .collect(),
        }
    }
}

/// Per-layer sizes of a batch, logged as JSON lines by the benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub layer_sizes: Vec<usize>,
    pub sampled_edges: Vec<usize>,
}

pub fn build_batch<R: Rng + ?Sized>(
    targets: &[MatchingNode],
    view: &MatchingGraphView<'_>,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> Result<Batch> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::invalid("batch needs at least one target"));
    }
    let hops = cfg.hops();
    let mut layers = vec![targets.to_vec()];
    let mut sampled = Vec::with_capacity(hops);
    for k in (1..=hops).rev() {
        let frontier = layers.last().expect("non-empty");
        let (next, adj) = batch_sampling(frontier, view, cfg.fanouts[k - 1], cfg.strategy, rng)?;
        layers.push(next);
        sampled.push(adj);
    }
    layers.reverse();
    sampled.reverse();
    Ok(Batch { layers, sampled })
}
