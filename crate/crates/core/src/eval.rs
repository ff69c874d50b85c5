//! Candidate-ranking evaluation, the attribute-only baseline, and dataset
//! diagnostics.
//!
//! Every test anchor `(s, t)` becomes a [`RankingTask`]: the true target plus
//! `n` non-anchor targets. Ranks are pessimistic: a candidate scoring equal
//! to the truth is counted as ranked above it.

use std::collections::{HashMap, HashSet, VecDeque};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{cosine, dot, MatchingGraphView, MatchingNode};
use crate::model::{forward, l2_normalize, ModelParams};
use crate::network::{AnchorSet, Network, NodeId};
use crate::rng::rng_from;
use crate::sampler::{build_batch, SamplingConfig};

/// Non-anchor candidates per task.
pub const DEFAULT_CANDIDATES: usize = 20;
/// Attribute cosine at or above which two users count as colliding.
pub const DEFAULT_COLLISION_THRESHOLD: f64 = 0.999;

const STREAM_CANDIDATES: u64 = 11;
const STREAM_SCORING: u64 = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingTask {
    pub source_node: NodeId,
    pub candidates: Vec<NodeId>,
    pub truth_index: usize,
}

impl RankingTask {
    pub fn truth(&self) -> NodeId {
        self.candidates[self.truth_index]
    }

    pub fn pairs(&self) -> impl Iterator<Item = MatchingNode> + '_ {
        self.candidates
            .iter()
            .map(move |&c| MatchingNode::new(self.source_node, c))
    }
}

/// The true target of `test_anchor` plus `n` distinct targets outside
/// `anchored_targets`, shuffled.
pub fn build_candidates<R: Rng + ?Sized>(
    test_anchor: (NodeId, NodeId),
    target: &Network,
    anchored_targets: &HashSet<NodeId>,
    n: usize,
    rng: &mut R,
) -> Result<RankingTask> {
    let (s, t) = test_anchor;
    target.check_node(t)?;
    let nt = target.node_count();
    let blocked = anchored_targets.iter().filter(|&&x| x < nt).count()
        + usize::from(!anchored_targets.contains(&t));
    let available = nt - blocked;
    if available < n {
        return Err(Error::invalid(format!(
            "need {n} non-anchor candidates but the target network only has {available}"
        )));
    }
    let admissible = |c: NodeId| c != t && !anchored_targets.contains(&c);
    let mut chosen: HashSet<NodeId> = HashSet::with_capacity(n);
    let mut candidates = Vec::with_capacity(n + 1);
    let mut misses = 0usize;
    while candidates.len() < n {
        let c = rng.random_range(0..nt);
        if admissible(c) && chosen.insert(c) {
            candidates.push(c);
        } else {
            misses += 1;
            if misses > 64 * (n + 1) {
                // Dense exclusions: sample from the explicit remainder instead.
                let mut rest: Vec<NodeId> = (0..nt)
                    .filter(|&c| admissible(c) && !chosen.contains(&c))
                    .collect();
                rest.shuffle(rng);
                candidates.extend(rest.into_iter().take(n - candidates.len()));
            }
        }
    }
    candidates.push(t);
    candidates.shuffle(rng);
    let truth_index = candidates
        .iter()
        .position(|&c| c == t)
        .expect("truth inserted");
    Ok(RankingTask {
        source_node: s,
        candidates,
        truth_index,
    })
}

/// One task per test anchor; task `i` draws from its own seeded stream.
pub fn build_tasks(
    test_anchors: &AnchorSet,
    target: &Network,
    anchored_targets: &HashSet<NodeId>,
    n: usize,
    seed: u64,
) -> Result<Vec<RankingTask>> {
    test_anchors
        .pairs()
        .iter()
        .enumerate()
        .map(|(i, &pair)| {
            let mut rng = rng_from(seed, &[STREAM_CANDIDATES, i as u64]);
            build_candidates(pair, target, anchored_targets, n, &mut rng)
        })
        .collect()
}

/// `1 + #{j != truth : score_j >= score_truth}`.
pub fn pessimistic_rank(scores: &[f64], truth_index: usize) -> usize {
    let truth = scores[truth_index];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &x)| {
            j != truth_index && x.partial_cmp(&truth) != Some(std::cmp::Ordering::Less)
        })
        .count()
}

pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::invalid("MRR of an empty rank list"));
    }
    if ranks.contains(&0) {
        return Err(Error::invalid("ranks start at 1"));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Fraction of ranks within the top `r`.
pub fn hits_at(ranks: &[usize], r: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::invalid("Hits@R of an empty rank list"));
    }
    if r == 0 {
        return Err(Error::invalid("R must be at least 1"));
    }
    Ok(ranks.iter().filter(|&&x| x <= r).count() as f64 / ranks.len() as f64)
}

/// Model probability for every pair, scored in batches.
///
/// All batches share one sampling stream derived from `sampling.seed`, and
/// the sampler seeds each node by its identity, so a pair's score does not
/// depend on the batch it lands in.
pub fn score_pairs(
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    pairs: &[MatchingNode],
    sampling: &SamplingConfig,
    batch_size: usize,
) -> Result<Vec<f64>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut scores = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(batch_size) {
        let mut rng = rng_from(sampling.seed, &[STREAM_SCORING]);
        let batch = build_batch(chunk, view, sampling, &mut rng)?;
        scores.extend(forward(&batch, params, view)?.probabilities);
    }
    Ok(scores)
}

/// Final embedding and probability for every pair; batching as in [`score_pairs`].
pub fn embed_pairs(
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    pairs: &[MatchingNode],
    sampling: &SamplingConfig,
    batch_size: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut embeddings = Vec::with_capacity(pairs.len());
    let mut scores = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(batch_size) {
        let mut rng = rng_from(sampling.seed, &[STREAM_SCORING]);
        let batch = build_batch(chunk, view, sampling, &mut rng)?;
        let out = forward(&batch, params, view)?;
        embeddings.extend(out.embeddings.rows().into_iter().map(|r| r.to_vec()));
        scores.extend(out.probabilities);
    }
    Ok((embeddings, scores))
}

/// Rank of the true anchor among the task's candidates by model probability.
pub fn rank_candidates<R: Rng + ?Sized>(
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    task: &RankingTask,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> Result<usize> {
    let pairs: Vec<MatchingNode> = task.pairs().collect();
    let batch = build_batch(&pairs, view, cfg, rng)?;
    let scores = forward(&batch, params, view)?.probabilities;
    Ok(pessimistic_rank(&scores, task.truth_index))
}

/// Rank of the true anchor by attribute cosine alone.
pub fn ac_baseline_rank(task: &RankingTask, source: &Network, target: &Network) -> usize {
    let xs = source.attributes(task.source_node);
    let scores: Vec<f64> = task
        .candidates
        .iter()
        .map(|&c| cosine(xs, target.attributes(c)))
        .collect();
    pessimistic_rank(&scores, task.truth_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub hits1: f64,
    pub hits10: f64,
    pub num_tasks: usize,
    pub wall_time_s: f64,
}

impl EvalReport {
    pub fn from_ranks(ranks: &[usize], wall_time_s: f64) -> Result<Self> {
        Ok(Self {
            mrr: mrr(ranks)?,
            hits1: hits_at(ranks, 1)?,
            hits10: hits_at(ranks, 10)?,
            num_tasks: ranks.len(),
            wall_time_s,
        })
    }
}

/// Ranks for every task under the model, spread over `workers` threads.
/// The result does not depend on the worker count.
pub fn model_ranks(
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    tasks: &[RankingTask],
    sampling: &SamplingConfig,
    batch_size: usize,
    workers: usize,
) -> Result<Vec<usize>> {
    let pairs: Vec<MatchingNode> = tasks.iter().flat_map(RankingTask::pairs).collect();
    let workers = workers.max(1);
    let scores = if workers == 1 || pairs.len() <= batch_size {
        score_pairs(params, view, &pairs, sampling, batch_size)?
    } else {
        let per = pairs.len().div_ceil(workers).div_ceil(batch_size) * batch_size;
        let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = pairs
                .chunks(per)
                .map(|part| {
                    scope.spawn(move || score_pairs(params, view, part, sampling, batch_size))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scoring worker panicked"))
                .collect()
        });
        let mut all = Vec::with_capacity(pairs.len());
        for part in parts {
            all.extend(part?);
        }
        all
    };
    let mut offset = 0;
    Ok(tasks
        .iter()
        .map(|task| {
            let n = task.candidates.len();
            let r = pessimistic_rank(&scores[offset..offset + n], task.truth_index);
            offset += n;
            r
        })
        .collect())
}

pub fn evaluate_model(
    params: &ModelParams,
    view: &MatchingGraphView<'_>,
    tasks: &[RankingTask],
    sampling: &SamplingConfig,
    batch_size: usize,
    workers: usize,
) -> Result<EvalReport> {
    let start = Instant::now();
    let ranks = model_ranks(params, view, tasks, sampling, batch_size, workers)?;
    EvalReport::from_ranks(&ranks, start.elapsed().as_secs_f64())
}

pub fn evaluate_ac(
    tasks: &[RankingTask],
    source: &Network,
    target: &Network,
) -> Result<EvalReport> {
    let start = Instant::now();
    let ranks: Vec<usize> = tasks
        .iter()
        .map(|t| ac_baseline_rank(t, source, target))
        .collect();
    EvalReport::from_ranks(&ranks, start.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Fraction of anchored sources with at least one non-anchor target whose
    /// attribute cosine reaches the threshold.
    pub collision_rate: f64,
    /// Share of anchor-to-anchor neighbor relations (within 1 hop) that are
    /// present on both sides.
    pub consistency_1hop: f64,
    /// Same, within 2 hops.
    pub consistency_2hop: f64,
}

/// Anchored nodes within `hops` of `v`, excluding `v`.
fn anchored_within(
    net: &Network,
    v: NodeId,
    hops: usize,
    anchored: &dyn Fn(NodeId) -> bool,
) -> Vec<NodeId> {
    let mut seen: HashMap<NodeId, usize> = HashMap::new();
    seen.insert(v, 0);
    let mut queue = VecDeque::from([v]);
    let mut out = Vec::new();
    while let Some(u) = queue.pop_front() {
        let d = seen[&u];
        if d == hops {
            continue;
        }
        for &w in net.adj(u) {
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
                if anchored(w) {
                    out.push(w);
                }
            }
        }
    }
    out
}

/// Fraction of anchored neighbor relations within `hops` that survive on
/// both sides, pooled over all anchors: `2 |preserved| / (|S| + |T|)`.
pub fn structure_consistency(
    source: &Network,
    target: &Network,
    anchors: &AnchorSet,
    hops: usize,
) -> f64 {
    let s2t = anchors.source_to_target();
    let t_anchored = anchors.targets();
    let mut preserved = 0usize;
    let mut total = 0usize;
    for &(s, t) in anchors.pairs() {
        let src = anchored_within(source, s, hops, &|v| s2t.contains_key(&v));
        let tgt: HashSet<NodeId> = anchored_within(target, t, hops, &|v| t_anchored.contains(&v))
            .into_iter()
            .collect();
        preserved += src.iter().filter(|v| tgt.contains(&s2t[v])).count();
        total += src.len() + tgt.len();
    }
    if total == 0 {
        0.0
    } else {
        2.0 * preserved as f64 / total as f64
    }
}

/// Fraction of anchored sources with a colliding non-anchor target.
pub fn collision_rate(
    source: &Network,
    target: &Network,
    anchors: &AnchorSet,
    threshold: f64,
) -> f64 {
    if anchors.is_empty() {
        return 0.0;
    }
    let unit = |x: &[f64]| {
        let mut x = x.to_vec();
        l2_normalize(&mut x);
        x
    };
    let anchored = anchors.targets();
    let pool: Vec<Vec<f64>> = (0..target.node_count())
        .filter(|u| !anchored.contains(u))
        .map(|u| unit(target.attributes(u)))
        .collect();
    let hits = anchors
        .pairs()
        .iter()
        .filter(|&&(s, _)| {
            let xs = unit(source.attributes(s));
            pool.iter().any(|xu| dot(&xs, xu) >= threshold)
        })
        .count();
    hits as f64 / anchors.len() as f64
}

pub fn measure_dataset(
    source: &Network,
    target: &Network,
    anchors: &AnchorSet,
    collision_threshold: f64,
) -> Result<Diagnostics> {
    anchors.validate(source, target)?;
    Ok(Diagnostics {
        collision_rate: collision_rate(source, target, anchors, collision_threshold),
        consistency_1hop: structure_consistency(source, target, anchors, 1),
        consistency_2hop: structure_consistency(source, target, anchors, 2),
    })
}
