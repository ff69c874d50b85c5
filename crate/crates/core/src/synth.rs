//! Correlated source/target network pairs with known anchors.
//!
//! A base graph is drawn once. Each side keeps every base edge independently
//! with probability `edge_preserve`, and the target side is relabeled by a
//! random permutation. Anchored nodes share a base attribute vector plus
//! independent noise per side. Colliders are non-anchor targets whose
//! attributes are exact copies of an anchored source's attributes.

use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{AnchorSet, Network, NodeId};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphModel {
    ErdosRenyi { p: f64 },
    PreferentialAttachment { m: usize },
}

/// How attribute vectors are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttributeModel {
    /// Dense standard-normal vectors of length `attr_dim`; noise is additive
    /// Gaussian with standard deviation `attr_noise`.
    #[default]
    Gaussian,
    /// `fields` one-hot encoded categorical fields of `categories` values each
    /// (`attr_dim = fields * categories`); noise resamples each field with
    /// probability `attr_noise`.
    Categorical { fields: usize, categories: usize },
}

impl Default for GraphModel {
    fn default() -> Self {
        GraphModel::PreferentialAttachment { m: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub model: GraphModel,
    /// Probability that a base edge survives into each side.
    pub edge_preserve: f64,
    pub anchor_fraction: f64,
    /// Colliders spawned per colliding anchor.
    pub collider_count: usize,
    /// Fraction of anchors that spawn colliders.
    pub collision_fraction: f64,
    pub attr_dim: usize,
    pub attributes: AttributeModel,
    /// Per-side attribute noise on anchored nodes; see [`AttributeModel`].
    pub attr_noise: f64,
    /// Source and target are both the unmodified base graph with identical attributes.
    pub identical: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            model: GraphModel::default(),
            edge_preserve: 1.0,
            anchor_fraction: 0.5,
            collider_count: 0,
            collision_fraction: 1.0,
            attr_dim: 16,
            attributes: AttributeModel::Gaussian,
            attr_noise: 0.0,
            identical: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn anchor_count(&self) -> usize {
        (self.n as f64 * self.anchor_fraction).round() as usize
    }

    pub fn colliding_anchor_count(&self) -> usize {
        if self.collider_count == 0 {
            0
        } else {
            (self.anchor_count() as f64 * self.collision_fraction).round() as usize
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.n < 2 {
            return Err(Error::invalid("synthetic networks need at least 2 nodes"));
        }
        match self.model {
            GraphModel::ErdosRenyi { p } if !unit(p) => {
                return Err(Error::invalid("edge probability must lie in [0, 1]"))
            }
            GraphModel::PreferentialAttachment { m } if m == 0 || m >= self.n => {
                return Err(Error::invalid("attachment count must lie in [1, n)"))
            }
            _ => {}
        }
        if !(self.edge_preserve > 0.0 && self.edge_preserve <= 1.0) {
            return Err(Error::invalid("edge_preserve must lie in (0, 1]"));
        }
        if !(self.anchor_fraction > 0.0 && self.anchor_fraction <= 1.0) || self.anchor_count() == 0
        {
            return Err(Error::invalid(
                "anchor_fraction must lie in (0, 1] and yield at least one anchor",
            ));
        }
        if !unit(self.collision_fraction) {
            return Err(Error::invalid("collision_fraction must lie in [0, 1]"));
        }
        if self.attr_dim == 0 {
            return Err(Error::invalid("attr_dim must be at least 1"));
        }
        if !(self.attr_noise >= 0.0 && self.attr_noise.is_finite()) {
            return Err(Error::invalid("attr_noise must be finite and non-negative"));
        }
        if let AttributeModel::Categorical { fields, categories } = self.attributes {
            if fields == 0 || categories < 2 {
                return Err(Error::invalid(
                    "categorical attributes need at least one field of two or more categories",
                ));
            }
            if fields * categories != self.attr_dim {
                return Err(Error::invalid(format!(
                    "attr_dim {} must equal fields * categories = {}",
                    self.attr_dim,
                    fields * categories
                )));
            }
            if self.attr_noise > 1.0 {
                return Err(Error::invalid(
                    "categorical attr_noise is a probability and must not exceed 1",
                ));
            }
        }
        let needed = self.collider_count * self.colliding_anchor_count();
        let free = self.n - self.anchor_count();
        if needed > free {
            return Err(Error::invalid(format!(
                "{needed} colliders requested but only {free} non-anchor targets exist"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub source: Network,
    pub target: Network,
    pub anchors: AnchorSet,
    pub config: SynthConfig,
}

/// File names inside a dataset directory.
pub struct DatasetPaths {
    pub source_edges: PathBuf,
    pub source_attrs: PathBuf,
    pub target_edges: PathBuf,
    pub target_attrs: PathBuf,
    pub anchors: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            source_edges: d.join("source.edges"),
            source_attrs: d.join("source.attrs.csv"),
            target_edges: d.join("target.edges"),
            target_attrs: d.join("target.attrs.csv"),
            anchors: d.join("anchors.txt"),
        }
    }
}

impl SynthDataset {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        std::fs::create_dir_all(dir.as_ref())?;
        let p = DatasetPaths::in_dir(dir);
        self.source.save(&p.source_edges, &p.source_attrs)?;
        self.target.save(&p.target_edges, &p.target_attrs)?;
        self.anchors.save(&p.anchors)
    }
}

/// Erdős–Rényi edges by geometric skipping over the upper triangle.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    if p <= 0.0 || n < 2 {
        return edges;
    }
    if p >= 1.0 {
        for v in 1..n {
            edges.extend((0..v).map(|w| (w, v)));
        }
        return edges;
    }
    let log_q = (1.0 - p).ln();
    let (mut v, mut w) = (1usize, -1i64);
    while v < n {
        let r: f64 = rng.random();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    edges
}

/// Preferential attachment: each new node links to `m` distinct earlier
/// nodes chosen proportionally to degree; the first `m` nodes seed the process.
pub fn preferential_attachment<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::with_capacity(n.saturating_sub(m) * m);
    if m == 0 || n <= m {
        return edges;
    }
    let mut repeated: Vec<NodeId> = Vec::with_capacity(2 * n * m);
    let mut chosen: Vec<NodeId> = (0..m).collect();
    for v in m..n {
        for &u in &chosen {
            edges.push((u, v));
            repeated.push(u);
            repeated.push(v);
        }
        chosen.clear();
        while chosen.len() < m {
            let u = repeated[rng.random_range(0..repeated.len())];
            if !chosen.contains(&u) {
                chosen.push(u);
            }
        }
    }
    edges
}

fn random_rows<R: Rng + ?Sized>(cfg: &SynthConfig, rows: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| match cfg.attributes {
            AttributeModel::Gaussian => (0..cfg.attr_dim)
                .map(|_| StandardNormal.sample(rng))
                .collect(),
            AttributeModel::Categorical { fields, categories } => {
                let mut x = vec![0.0; cfg.attr_dim];
                for f in 0..fields {
                    x[f * categories + rng.random_range(0..categories)] = 1.0;
                }
                x
            }
        })
        .collect()
}

fn perturb<R: Rng + ?Sized>(cfg: &SynthConfig, x: &[f64], rng: &mut R) -> Vec<f64> {
    match cfg.attributes {
        AttributeModel::Gaussian => x
            .iter()
            .map(|&a| {
                let e: f64 = StandardNormal.sample(rng);
                a + cfg.attr_noise * e
            })
            .collect(),
        AttributeModel::Categorical { fields, categories } => {
            let mut out = x.to_vec();
            for f in 0..fields {
                if rng.random::<f64>() < cfg.attr_noise {
                    let block = &mut out[f * categories..(f + 1) * categories];
                    block.fill(0.0);
                    block[rng.random_range(0..categories)] = 1.0;
                }
            }
            out
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    generate_with(cfg, &mut rng_from(cfg.seed, &[]))
}

pub fn generate_with<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<SynthDataset> {
    cfg.validate()?;
    let n = cfg.n;
    let base = match cfg.model {
        GraphModel::ErdosRenyi { p } => erdos_renyi(n, p, rng),
        GraphModel::PreferentialAttachment { m } => preferential_attachment(n, m, rng),
    };
    let base_attrs = random_rows(cfg, n, rng);
    let mut anchored: Vec<NodeId> = index::sample(rng, n, cfg.anchor_count()).into_vec();
    anchored.sort_unstable();

    if cfg.identical {
        let source = Network::from_edges(&base, base_attrs)?;
        let anchors = AnchorSet::new(anchored.iter().map(|&v| (v, v)).collect())?;
        return Ok(SynthDataset {
            target: source.clone(),
            source,
            anchors,
            config: cfg.clone(),
        });
    }

    let mut perm: Vec<NodeId> = (0..n).collect();
    perm.shuffle(rng);
    let keep = |rng: &mut R| cfg.edge_preserve >= 1.0 || rng.random::<f64>() < cfg.edge_preserve;
    let source_edges: Vec<_> = base.iter().copied().filter(|_| keep(rng)).collect();
    let target_edges: Vec<_> = base
        .iter()
        .filter(|_| keep(rng))
        .map(|&(u, v)| (perm[u], perm[v]))
        .collect();

    let mut is_anchor = vec![false; n];
    for &v in &anchored {
        is_anchor[v] = true;
    }
    let mut source_attrs = Vec::with_capacity(n);
    for v in 0..n {
        source_attrs.push(if is_anchor[v] {
            perturb(cfg, &base_attrs[v], rng)
        } else {
            base_attrs[v].clone()
        });
    }
    let fresh = random_rows(cfg, n, rng);
    let mut target_attrs = vec![Vec::new(); n];
    for v in 0..n {
        target_attrs[perm[v]] = if is_anchor[v] {
            perturb(cfg, &base_attrs[v], rng)
        } else {
            fresh[v].clone()
        };
    }

    let colliding = cfg.colliding_anchor_count();
    if colliding > 0 {
        let mut free: Vec<NodeId> = (0..n).filter(|&v| !is_anchor[v]).map(|v| perm[v]).collect();
        free.shuffle(rng);
        let which = index::sample(rng, anchored.len(), colliding);
        let mut slots = free.into_iter();
        for i in which.iter() {
            let s = anchored[i];
            for _ in 0..cfg.collider_count {
                let t = slots
                    .next()
                    .expect("collider feasibility checked in validate");
                target_attrs[t] = source_attrs[s].clone();
            }
        }
    }

    Ok(SynthDataset {
        source: Network::from_edges(&source_edges, source_attrs)?,
        target: Network::from_edges(&target_edges, target_attrs)?,
        anchors: AnchorSet::new(anchored.iter().map(|&v| (v, perm[v])).collect())?,
        config: cfg.clone(),
    })
}

pub const PRESETS: [&str; 3] = [
    "online-offline-like",
    "flickr-lastfm-like",
    "flickr-myspace-like",
];

/// Configurations calibrated so that the measured collision rate and 1-hop
/// consistency land near (0.11, 0.62), (0.18, 0.32) and (0.22, 0.12).
pub fn preset(name: &str) -> Result<SynthConfig> {
    let (edge_preserve, collision_fraction) = match name {
        "online-offline-like" => (0.62, 0.11),
        "flickr-lastfm-like" => (0.32, 0.18),
        "flickr-myspace-like" => (0.12, 0.22),
        _ => {
            return Err(Error::invalid(format!(
                "unknown preset {name:?} (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(SynthConfig {
        n: 2000,
        model: GraphModel::PreferentialAttachment { m: 3 },
        edge_preserve,
        anchor_fraction: 0.5,
        collider_count: 1,
        collision_fraction,
        attr_dim: 200,
        attributes: AttributeModel::Categorical {
            fields: 4,
            categories: 50,
        },
        attr_noise: 0.5,
        identical: false,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{collision_rate, structure_consistency};
    use crate::matching::cosine;
    use std::collections::HashSet;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n: 200,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn perfect_copy_is_an_isomorphism() {
        let d = generate(&small(1)).unwrap();
        assert_eq!(d.source.edge_count(), d.target.edge_count());
        for &(s, t) in d.anchors.pairs() {
            assert_eq!(d.source.attributes(s), d.target.attributes(t));
        }
        let map = d.anchors.source_to_target();
        for (u, v) in d.source.edges() {
            if let (Some(&a), Some(&b)) = (map.get(&u), map.get(&v)) {
                assert!(d.target.has_edge(a, b));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(&small(3)).unwrap(), generate(&small(3)).unwrap());
        assert_ne!(
            generate(&small(3)).unwrap().source,
            generate(&small(4)).unwrap().source
        );
    }

    #[test]
    fn colliders_guarantee_collision() {
        let cfg = SynthConfig {
            collider_count: 2,
            anchor_fraction: 0.25,
            ..small(2)
        };
        let d = generate(&cfg).unwrap();
        assert_eq!(collision_rate(&d.source, &d.target, &d.anchors, 0.999), 1.0);
        let plain = generate(&small(2)).unwrap();
        assert_eq!(
            collision_rate(&plain.source, &plain.target, &plain.anchors, 0.999),
            0.0
        );
    }

    #[test]
    fn collider_feasibility() {
        let cfg = SynthConfig {
            collider_count: 2,
            anchor_fraction: 0.5,
            ..small(0)
        };
        assert!(generate(&cfg).is_err());
        let ok = SynthConfig {
            collider_count: 1,
            ..cfg
        };
        assert!(generate(&ok).is_ok());
    }

    #[test]
    fn identical_mode() {
        let cfg = SynthConfig {
            identical: true,
            edge_preserve: 0.3,
            ..small(5)
        };
        let d = generate(&cfg).unwrap();
        assert_eq!(d.source, d.target);
        assert!(d.anchors.pairs().iter().all(|&(s, t)| s == t));
    }

    #[test]
    fn noise_lowers_anchor_similarity() {
        let cfg = SynthConfig {
            attr_noise: 0.5,
            ..small(6)
        };
        let d = generate(&cfg).unwrap();
        let mean: f64 = d
            .anchors
            .pairs()
            .iter()
            .map(|&(s, t)| cosine(d.source.attributes(s), d.target.attributes(t)))
            .sum::<f64>()
            / d.anchors.len() as f64;
        assert!(mean > 0.6 && mean < 0.95, "{mean}");
    }

    #[test]
    fn edge_preservation_drives_consistency() {
        let cfg = SynthConfig {
            edge_preserve: 0.5,
            n: 1000,
            ..small(7)
        };
        let d = generate(&cfg).unwrap();
        let c = structure_consistency(&d.source, &d.target, &d.anchors, 1);
        assert!((c - 0.5).abs() < 0.05, "{c}");
    }

    #[test]
    fn erdos_renyi_density() {
        let mut rng = rng_from(0, &[]);
        let n = 2000;
        let p = 0.005;
        let edges = erdos_renyi(n, p, &mut rng);
        let expected = p * (n * (n - 1) / 2) as f64;
        assert!((edges.len() as f64 - expected).abs() < 4.0 * expected.sqrt());
        let distinct: HashSet<_> = edges.iter().collect();
        assert_eq!(distinct.len(), edges.len());
        assert!(edges.iter().all(|&(u, v)| u < v && v < n));
        assert_eq!(erdos_renyi(5, 1.0, &mut rng).len(), 10);
        assert!(erdos_renyi(5, 0.0, &mut rng).is_empty());
    }

    #[test]
    fn preferential_attachment_shape() {
        let mut rng = rng_from(0, &[]);
        let edges = preferential_attachment(500, 3, &mut rng);
        assert_eq!(edges.len(), (500 - 3) * 3);
        let net = Network::from_edges(&edges, vec![vec![1.0]; 500]).unwrap();
        assert_eq!(net.edge_count(), edges.len());
        let max_degree = (0..500).map(|v| net.degree(v)).max().unwrap();
        assert!(max_degree > 20, "expected hubs, max degree {max_degree}");
    }

    #[test]
    fn unknown_preset() {
        assert!(preset("douban").is_err());
        for name in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn round_trip_files() {
        let d = generate(&small(8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.save(dir.path()).unwrap();
        let p = DatasetPaths::in_dir(dir.path());
        let source = Network::load(&p.source_edges, &p.source_attrs).unwrap();
        let target = Network::load(&p.target_edges, &p.target_attrs).unwrap();
        let anchors = AnchorSet::load(&p.anchors, &source, &target).unwrap();
        assert_eq!(source, d.source);
        assert_eq!(target, d.target);
        assert_eq!(anchors, d.anchors);
    }
}
