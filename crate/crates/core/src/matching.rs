//! The matching graph as a lazy view over two networks.
//!
//! A matching node pairs one source node with one target node; its features
//! come from a [`ThetaKind`] combiner applied to the two attribute vectors.
//! Two matching nodes are adjacent iff their source ends are adjacent in the
//! source network and their target ends are adjacent in the target network.
//! Nothing quadratic is ever stored: neighborhoods are decoded on demand from
//! the two per-network neighbor lists.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, NodeId};

/// Default cap on `n_s * n_t` for [`MatchingGraphView::materialize`].
pub const DEFAULT_MATERIALIZE_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchingNode {
    pub s: NodeId,
    pub t: NodeId,
}

impl MatchingNode {
    pub fn new(s: NodeId, t: NodeId) -> Self {
        Self { s, t }
    }
}

impl fmt::Display for MatchingNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.s, self.t)
    }
}

/// How the two attribute vectors of a matching node are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaKind {
    /// One feature: the cosine similarity.
    #[default]
    #[serde(rename = "cosine")]
    CosineScalar,
    /// Element-wise product; needs equal dimensions.
    Hadamard,
    /// Source attributes followed by target attributes.
    Concat,
}

impl ThetaKind {
    pub fn output_dim(self, source_dim: usize, target_dim: usize) -> Result<usize> {
        match self {
            ThetaKind::CosineScalar => Ok(1),
            ThetaKind::Hadamard if source_dim != target_dim => Err(Error::DimensionMismatch {
                expected: source_dim,
                got: target_dim,
            }),
            ThetaKind::Hadamard => Ok(source_dim),
            ThetaKind::Concat => Ok(source_dim + target_dim),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ThetaKind::CosineScalar => "cosine",
            ThetaKind::Hadamard => "hadamard",
            ThetaKind::Concat => "concat",
        }
    }
}

impl FromStr for ThetaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(ThetaKind::CosineScalar),
            "hadamard" => Ok(ThetaKind::Hadamard),
            "concat" => Ok(ThetaKind::Concat),
            other => Err(Error::invalid(format!(
                "unknown theta {other:?} (expected cosine, hadamard or concat)"
            ))),
        }
    }
}

impl fmt::Display for ThetaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_norms(a, b, norm(a), norm(b))
}

#[inline]
fn cosine_with_norms(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

pub fn theta(xs: &[f64], xt: &[f64], kind: ThetaKind) -> Result<Vec<f64>> {
    let mut out = vec![0.0; kind.output_dim(xs.len(), xt.len())?];
    theta_into(xs, xt, kind, norm(xs), norm(xt), &mut out);
    Ok(out)
}

/// Writes θ(xs, xt) into `out`; dimensions must already be validated.
fn theta_into(xs: &[f64], xt: &[f64], kind: ThetaKind, ns: f64, nt: f64, out: &mut [f64]) {
    match kind {
        ThetaKind::CosineScalar => out[0] = cosine_with_norms(xs, xt, ns, nt),
        ThetaKind::Hadamard => {
            for ((o, a), b) in out.iter_mut().zip(xs).zip(xt) {
                *o = a * b;
            }
        }
        ThetaKind::Concat => {
            out[..xs.len()].copy_from_slice(xs);
            out[xs.len()..].copy_from_slice(xt);
        }
    }
}

/// Lazy matching graph over a source and a target network.
#[derive(Debug, Clone)]
pub struct MatchingGraphView<'a> {
    source: &'a Network,
    target: &'a Network,
    theta: ThetaKind,
    feature_dim: usize,
    source_norms: Vec<f64>,
    target_norms: Vec<f64>,
}

impl<'a> MatchingGraphView<'a> {
    pub fn new(source: &'a Network, target: &'a Network, theta: ThetaKind) -> Result<Self> {
        let feature_dim = theta.output_dim(source.dim(), target.dim())?;
        let norms = |net: &Network| {
            (0..net.node_count())
                .map(|v| norm(net.attributes(v)))
                .collect()
        };
        Ok(Self {
            source,
            target,
            theta,
            feature_dim,
            source_norms: norms(source),
            target_norms: norms(target),
        })
    }

    pub fn source(&self) -> &'a Network {
        self.source
    }

    pub fn target(&self) -> &'a Network {
        self.target
    }

    pub fn theta(&self) -> ThetaKind {
        self.theta
    }

    /// Layer-0 feature dimension `d0`.
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn check(&self, m: MatchingNode) -> Result<()> {
        self.source.check_node(m.s)?;
        self.target.check_node(m.t)
    }

    /// Layer-0 features of `m` written into `out` (length `feature_dim`).
    pub fn features_into(&self, m: MatchingNode, out: &mut [f64]) {
        theta_into(
            self.source.attributes(m.s),
            self.target.attributes(m.t),
            self.theta,
            self.source_norms[m.s],
            self.target_norms[m.t],
            out,
        );
    }

    pub fn features(&self, m: MatchingNode) -> Vec<f64> {
        let mut out = vec![0.0; self.feature_dim];
        self.features_into(m, &mut out);
        out
    }

    /// Attribute cosine between the two ends of `m`, whatever θ is.
    pub fn attribute_cosine(&self, m: MatchingNode) -> f64 {
        cosine_with_norms(
            self.source.attributes(m.s),
            self.target.attributes(m.t),
            self.source_norms[m.s],
            self.target_norms[m.t],
        )
    }

    /// `deg(s) * deg(t)`.
    #[inline]
    pub fn neighbor_count(&self, m: MatchingNode) -> usize {
        self.source.degree(m.s) * self.target.degree(m.t)
    }

    /// The `idx`-th matching neighbor of `m` in lexicographic order.
    #[inline]
    pub fn neighbor_at(&self, m: MatchingNode, idx: usize) -> MatchingNode {
        let nt = self.target.adj(m.t);
        let ns = self.source.adj(m.s);
        MatchingNode::new(ns[idx / nt.len()], nt[idx % nt.len()])
    }

    /// All matching neighbors of `m`: `N(s) x N(t)` in lexicographic order.
    pub fn matching_neighbors(&self, m: MatchingNode) -> Result<Vec<MatchingNode>> {
        self.check(m)?;
        let nt = self.target.adj(m.t);
        Ok(self
            .source
            .adj(m.s)
            .iter()
            .flat_map(|&s| nt.iter().map(move |&t| MatchingNode::new(s, t)))
            .collect())
    }

    pub fn is_matching_edge(&self, a: MatchingNode, b: MatchingNode) -> bool {
        self.source.has_edge(a.s, b.s) && self.target.has_edge(a.t, b.t)
    }

    /// Enumerates the whole matching graph. Quadratic; meant for test oracles
    /// and debugging on small inputs only.
    pub fn materialize(&self, cap: usize) -> Result<MaterializedGraph> {
        let (ns, nt) = (self.source.node_count(), self.target.node_count());
        let total = ns.saturating_mul(nt);
        if total > cap {
            return Err(Error::CapExceeded { nodes: total, cap });
        }
        let nodes: Vec<MatchingNode> = (0..ns)
            .flat_map(|s| (0..nt).map(move |t| MatchingNode::new(s, t)))
            .collect();
        let mut edges = Vec::new();
        for (i, &a) in nodes.iter().enumerate() {
            for (j, &b) in nodes.iter().enumerate().skip(i + 1) {
                if self.is_matching_edge(a, b) {
                    edges.push((i, j));
                }
            }
        }
        Ok(MaterializedGraph { nodes, edges })
    }
}

/// Explicit matching graph: node list plus undirected edges as index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterializedGraph {
    pub nodes: Vec<MatchingNode>,
    pub edges: Vec<(usize, usize)>,
}

impl MaterializedGraph {
    pub fn write_dot(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "graph matching {{")?;
        for (i, m) in self.nodes.iter().enumerate() {
            writeln!(w, "  n{i} [label=\"v{}u{}\"];", m.s, m.t)?;
        }
        for (a, b) in &self.edges {
            writeln!(w, "  n{a} -- n{b};")?;
        }
        writeln!(w, "}}")
    }
}
