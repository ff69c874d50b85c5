//! Undirected attributed networks and cross-network anchor sets.
//!
//! A [`Network`] stores its adjacency in compressed sparse row form with
//! sorted, de-duplicated neighbor lists, and its node attributes as one dense
//! row-major block. Node ids are dense and 0-based.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    attrs: Vec<f64>,
    dim: usize,
}

impl Network {
    /// Builds a network from an edge list and one attribute row per node.
    ///
    /// Edges are symmetrized and de-duplicated. Self-loops and out-of-range
    /// ids are rejected.
    pub fn from_edges(edges: &[(NodeId, NodeId)], attributes: Vec<Vec<f64>>) -> Result<Self> {
        let dim = attributes.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::invalid("attribute rows must be non-empty"));
        }
        let mut flat = Vec::with_capacity(attributes.len() * dim);
        for row in &attributes {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(attributes.len(), edges.iter().copied(), flat, dim)
    }

    /// Same as [`Network::from_edges`] with attributes already flattened
    /// row-major into `attrs` (`node_count * dim` values).
    pub fn from_flat(
        node_count: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
        attrs: Vec<f64>,
        dim: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("attribute dimension must be at least 1"));
        }
        if attrs.len() != node_count * dim {
            return Err(Error::DimensionMismatch {
                expected: node_count * dim,
                got: attrs.len(),
            });
        }
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); node_count];
        for (u, v) in edges {
            for id in [u, v] {
                if id >= node_count {
                    return Err(Error::InvalidNode {
                        id,
                        count: node_count,
                    });
                }
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop on node {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        Ok(Self {
            offsets,
            neighbors,
            attrs,
            dim,
        })
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Attribute dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn check_node(&self, v: NodeId) -> Result<()> {
        if v < self.node_count() {
            Ok(())
        } else {
            Err(Error::InvalidNode {
                id: v,
                count: self.node_count(),
            })
        }
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: NodeId) -> Result<&[NodeId]> {
        self.check_node(v)?;
        Ok(self.adj(v))
    }

    /// Unchecked neighbor access for hot loops; panics on an invalid id.
    #[inline]
    pub fn adj(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    #[inline]
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.node_count() && v < self.node_count() && self.adj(u).binary_search(&v).is_ok()
    }

    #[inline]
    pub fn attributes(&self, v: NodeId) -> &[f64] {
        &self.attrs[v * self.dim..(v + 1) * self.dim]
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.adj(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    pub fn load(edge_path: impl AsRef<Path>, attr_path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(edge_path, attr_path, &LoadOptions::default())
    }

    pub fn load_with(
        edge_path: impl AsRef<Path>,
        attr_path: impl AsRef<Path>,
        opts: &LoadOptions,
    ) -> Result<Self> {
        let (attrs, dim, node_count) =
            read_attributes(attr_path.as_ref(), &opts.categorical_columns)?;
        Self::assemble(edge_path.as_ref(), attrs, dim, node_count, opts)
    }

    /// Loads both sides of a network pair. Categorical columns share one
    /// label vocabulary so equal labels get equal one-hot positions.
    pub fn load_pair(
        source: (&Path, &Path),
        target: (&Path, &Path),
        categorical_columns: &[usize],
    ) -> Result<(Self, Self)> {
        let (src_rows, src_width) = read_attribute_rows(source.1)?;
        let (tgt_rows, tgt_width) = read_attribute_rows(target.1)?;
        let categories = category_labels(
            &[(&src_rows, src_width), (&tgt_rows, tgt_width)],
            categorical_columns,
        )?;
        let opts = LoadOptions::default();
        let (attrs, dim) = encode_attributes(source.1, &src_rows, src_width, &categories)?;
        let s = Self::assemble(source.0, attrs, dim, src_rows.len(), &opts)?;
        let (attrs, dim) = encode_attributes(target.1, &tgt_rows, tgt_width, &categories)?;
        let t = Self::assemble(target.0, attrs, dim, tgt_rows.len(), &opts)?;
        Ok((s, t))
    }

    fn assemble(
        edge_path: &Path,
        attrs: Vec<f64>,
        dim: usize,
        node_count: usize,
        opts: &LoadOptions,
    ) -> Result<Self> {
        let ids = opts.id_map.as_deref().map(IdMap::load).transpose()?;
        if let Some(ids) = &ids {
            if ids.len() != node_count {
                return Err(Error::invalid(format!(
                    "id map has {} entries but attribute file has {node_count} rows",
                    ids.len()
                )));
            }
        }
        let edges = read_pairs(
            edge_path,
            ids.as_ref(),
            ids.as_ref(),
            node_count,
            node_count,
            true,
        )?;
        Self::from_flat(node_count, edges, attrs, dim)
    }

    /// Writes the edge list (`u v` with `u < v`) and the attribute CSV.
    pub fn save(&self, edge_path: impl AsRef<Path>, attr_path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(edge_path)?);
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        w.flush()?;
        let mut w = BufWriter::new(File::create(attr_path)?);
        for v in 0..self.node_count() {
            let row = self.attributes(v);
            for (i, x) in row.iter().enumerate() {
                if i > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{x}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loader options beyond the plain numeric format.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Attribute CSV columns holding category labels; each is one-hot encoded
    /// over its sorted distinct values.
    pub categorical_columns: Vec<usize>,
    /// Sidecar file with one external id per line (line `i` names node `i`).
    /// When set, edge files are read as external ids instead of integers.
    pub id_map: Option<std::path::PathBuf>,
}

/// External string ids for the nodes of one network.
#[derive(Debug, Clone)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl IdMap {
    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut names = Vec::new();
        let mut index = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let name = line.trim();
            if name.is_empty() {
                return Err(Error::parse(path, i + 1, "empty external id"));
            }
            if index.insert(name.to_string(), names.len()).is_some() {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("duplicate external id {name:?}"),
                ));
            }
            names.push(name.to_string());
        }
        Ok(Self { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }
}

type Rows = Vec<Vec<String>>;

fn read_attribute_rows(path: &Path) -> Result<(Rows, usize)> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Rows = Vec::new();
    let mut width = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            return Err(Error::parse(path, i + 1, "empty attribute row"));
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("ragged row: expected {w} columns, found {}", cells.len()),
                ))
            }
            _ => {}
        }
        rows.push(cells);
    }
    let width = width.unwrap_or(0);
    Ok((rows, width))
}

/// Sorted distinct labels per categorical column over all `tables`.
fn category_labels(
    tables: &[(&Rows, usize)],
    categorical: &[usize],
) -> Result<BTreeMap<usize, Vec<String>>> {
    let mut categories: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for &(rows, width) in tables {
        if let Some(&c) = categorical
            .iter()
            .find(|&&c| c >= width && !rows.is_empty())
        {
            return Err(Error::invalid(format!(
                "categorical column {c} out of range for {width}-column attribute file"
            )));
        }
        for &c in categorical {
            categories
                .entry(c)
                .or_default()
                .extend(rows.iter().map(|r| r[c].clone()));
        }
    }
    for labels in categories.values_mut() {
        labels.sort();
        labels.dedup();
    }
    Ok(categories)
}

fn encode_attributes(
    path: &Path,
    rows: &Rows,
    width: usize,
    categories: &BTreeMap<usize, Vec<String>>,
) -> Result<(Vec<f64>, usize)> {
    let dim: usize = (0..width)
        .map(|c| categories.get(&c).map_or(1, Vec::len))
        .sum();
    let mut attrs = Vec::with_capacity(rows.len() * dim);
    for (i, row) in rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if let Some(labels) = categories.get(&c) {
                let hot = labels.binary_search(cell).expect("label collected above");
                attrs.extend((0..labels.len()).map(|k| if k == hot { 1.0 } else { 0.0 }));
            } else {
                let x: f64 = cell.parse().map_err(|_| {
                    Error::parse(path, i + 1, format!("unparsable attribute value {cell:?}"))
                })?;
                if !x.is_finite() {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("non-finite attribute value {cell:?}"),
                    ));
                }
                attrs.push(x);
            }
        }
    }
    Ok((attrs, dim))
}

fn read_attributes(path: &Path, categorical: &[usize]) -> Result<(Vec<f64>, usize, usize)> {
    let (rows, width) = read_attribute_rows(path)?;
    let categories = category_labels(&[(&rows, width)], categorical)?;
    let (attrs, dim) = encode_attributes(path, &rows, width, &categories)?;
    Ok((attrs, dim, rows.len()))
}

fn parse_id(
    path: &Path,
    line: usize,
    token: &str,
    ids: Option<&IdMap>,
    count: usize,
) -> Result<NodeId> {
    let id = match ids {
        Some(map) => map
            .get(token)
            .ok_or_else(|| Error::parse(path, line, format!("unknown node id {token:?}")))?,
        None => token
            .parse::<NodeId>()
            .map_err(|_| Error::parse(path, line, format!("unparsable node id {token:?}")))?,
    };
    if id >= count {
        return Err(Error::parse(
            path,
            line,
            format!("node id {id} out of range ({count} nodes)"),
        ));
    }
    Ok(id)
}

/// `(source, target)` id pairs from a whitespace-separated file, range-checked
/// against the two node counts. Unlike [`AnchorSet::load`], repeats are allowed.
pub fn read_pair_file(
    path: impl AsRef<Path>,
    source_count: usize,
    target_count: usize,
) -> Result<Vec<(NodeId, NodeId)>> {
    read_pairs(path.as_ref(), None, None, source_count, target_count, false)
}

/// Reads whitespace-separated id pairs, one per line. Blank lines and lines
/// starting with `#` are skipped.
fn read_pairs(
    path: &Path,
    left_ids: Option<&IdMap>,
    right_ids: Option<&IdMap>,
    left_count: usize,
    right_count: usize,
    reject_self_loops: bool,
) -> Result<Vec<(NodeId, NodeId)>> {
    let reader = BufReader::new(File::open(path)?);
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 2 ids, found {}", tokens.len()),
            ));
        }
        let u = parse_id(path, i + 1, tokens[0], left_ids, left_count)?;
        let v = parse_id(path, i + 1, tokens[1], right_ids, right_count)?;
        if reject_self_loops && u == v {
            return Err(Error::parse(path, i + 1, format!("self-loop on node {u}")));
        }
        pairs.push((u, v));
    }
    Ok(pairs)
}

/// Known (source, target) correspondences: a partial one-to-one matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(NodeId, NodeId)>", into = "Vec<(NodeId, NodeId)>")]
pub struct AnchorSet {
    pairs: Vec<(NodeId, NodeId)>,
}

impl TryFrom<Vec<(NodeId, NodeId)>> for AnchorSet {
    type Error = Error;

    fn try_from(pairs: Vec<(NodeId, NodeId)>) -> Result<Self> {
        Self::new(pairs)
    }
}

impl From<AnchorSet> for Vec<(NodeId, NodeId)> {
    fn from(a: AnchorSet) -> Self {
        a.pairs
    }
}

impl AnchorSet {
    pub fn new(pairs: Vec<(NodeId, NodeId)>) -> Result<Self> {
        let mut sources = HashSet::with_capacity(pairs.len());
        let mut targets = HashSet::with_capacity(pairs.len());
        for &(s, t) in &pairs {
            if !sources.insert(s) {
                return Err(Error::invalid(format!(
                    "source node {s} anchored more than once"
                )));
            }
            if !targets.insert(t) {
                return Err(Error::invalid(format!(
                    "target node {t} anchored more than once"
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: (NodeId, NodeId)) -> bool {
        self.pairs.contains(&pair)
    }

    /// Checks every id against the two networks.
    pub fn validate(&self, source: &Network, target: &Network) -> Result<()> {
        for &(s, t) in &self.pairs {
            source.check_node(s)?;
            target.check_node(t)?;
        }
        Ok(())
    }

    pub fn source_to_target(&self) -> HashMap<NodeId, NodeId> {
        self.pairs.iter().copied().collect()
    }

    pub fn targets(&self) -> HashSet<NodeId> {
        self.pairs.iter().map(|&(_, t)| t).collect()
    }

    pub fn load(path: impl AsRef<Path>, source: &Network, target: &Network) -> Result<Self> {
        Self::load_with_ids(path, source, target, None, None)
    }

    pub fn load_with_ids(
        path: impl AsRef<Path>,
        source: &Network,
        target: &Network,
        source_ids: Option<&IdMap>,
        target_ids: Option<&IdMap>,
    ) -> Result<Self> {
        let pairs = read_pairs(
            path.as_ref(),
            source_ids,
            target_ids,
            source.node_count(),
            target.node_count(),
            false,
        )?;
        Self::new(pairs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (s, t) in &self.pairs {
            writeln!(w, "{s} {t}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of training pairs for a split: round-half-up of `len * ratio`.
pub fn train_size(len: usize, ratio: f64) -> usize {
    (len as f64 * ratio + 0.5).floor() as usize
}

/// Shuffles the anchors with `seed` and cuts them into a train and a test part.
pub fn split_anchors(
    anchors: &AnchorSet,
    train_ratio: f64,
    seed: u64,
) -> Result<(AnchorSet, AnchorSet)> {
    if anchors.is_empty() {
        return Err(Error::invalid("cannot split an empty anchor set"));
    }
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::invalid(format!(
            "train ratio {train_ratio} outside (0, 1)"
        )));
    }
    let n_train = train_size(anchors.len(), train_ratio);
    if n_train == 0 || n_train == anchors.len() {
        return Err(Error::invalid(format!(
            "train ratio {train_ratio} on {} anchors leaves an empty side",
            anchors.len()
        )));
    }
    let mut pairs = anchors.pairs.clone();
    let mut rng = rng::rng_from(seed, &[0x5917]);
    pairs.shuffle(&mut rng);
    let test = pairs.split_off(n_train);
    Ok((AnchorSet { pairs }, AnchorSet { pairs: test }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn attrs(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64, 1.0]).collect()
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn path_neighbors() {
        let net = Network::from_edges(&[(0, 1), (1, 2)], attrs(3)).unwrap();
        assert_eq!(net.neighbors(1).unwrap(), &[0, 2]);
        assert_eq!(net.neighbors(0).unwrap(), &[1]);
    }

    #[test]
    fn isolated_node_has_no_neighbors() {
        let net = Network::from_edges(&[(0, 1)], attrs(3)).unwrap();
        assert!(net.neighbors(2).unwrap().is_empty());
    }

    #[test]
    fn invalid_node_rejected() {
        let net = Network::from_edges(&[(0, 1)], attrs(2)).unwrap();
        assert!(matches!(
            net.neighbors(2),
            Err(Error::InvalidNode { id: 2, count: 2 })
        ));
    }

    #[test]
    fn figure_source_graph() {
        // v1 - v2 - v3 as ids 0, 1, 2
        let net = Network::from_edges(&[(0, 1), (1, 2)], attrs(3)).unwrap();
        assert_eq!(net.neighbors(1).unwrap(), &[0, 2]);
    }

    #[test]
    fn load_symmetrizes_and_dedups() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e", "0 1\n1 0\n");
        let a = write(dir.path(), "a", "1,2\n3,4\n");
        let net = Network::load(&e, &a).unwrap();
        assert_eq!(net.degree(0), 1);
        assert_eq!(net.edge_count(), 1);
        assert_eq!(net.attributes(1), &[3.0, 4.0]);
    }

    #[test]
    fn load_rejects_self_loop_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let e = write(dir.path(), "e", "0 1\n1 1\n");
        let a = write(dir.path(), "a", "1\n2\n");
        let err = Network::load(&e, &a).unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("self-loop"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_rejects_out_of_range_and_bad_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a", "1\n2\n");
        let e = write(dir.path(), "e1", "0 5\n");
        assert!(matches!(
            Network::load(&e, &a),
            Err(Error::Parse { line: 1, .. })
        ));
        let e = write(dir.path(), "e2", "0 1\nx 1\n");
        assert!(matches!(
            Network::load(&e, &a),
            Err(Error::Parse { line: 2, .. })
        ));
        let ragged = write(dir.path(), "a2", "1,2\n3\n");
        let e = write(dir.path(), "e3", "0 1\n");
        assert!(matches!(
            Network::load(&e, &ragged),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad = write(dir.path(), "a3", "1\nfoo\n");
        assert!(matches!(
            Network::load(&e, &bad),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn categorical_columns_are_one_hot() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a", "0.5,m\n1.5,f\n2.5,m\n");
        let e = write(dir.path(), "e", "0 1\n");
        let opts = LoadOptions {
            categorical_columns: vec![1],
            ..Default::default()
        };
        let net = Network::load_with(&e, &a, &opts).unwrap();
        assert_eq!(net.dim(), 3);
        assert_eq!(net.attributes(0), &[0.5, 0.0, 1.0]);
        assert_eq!(net.attributes(1), &[1.5, 1.0, 0.0]);
    }

    #[test]
    fn pair_loader_shares_category_vocabulary() {
        let dir = tempfile::tempdir().unwrap();
        let sa = write(dir.path(), "sa", "a\nb\n");
        let ta = write(dir.path(), "ta", "c\nb\n");
        let e = write(dir.path(), "e", "0 1\n");
        let (s, t) = Network::load_pair((&e, &sa), (&e, &ta), &[0]).unwrap();
        assert_eq!((s.dim(), t.dim()), (3, 3));
        assert_eq!(s.attributes(1), t.attributes(1));
        assert_eq!(t.attributes(0), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn external_ids_via_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let ids = write(dir.path(), "ids", "alice\nbob\ncarol\n");
        let a = write(dir.path(), "a", "1\n2\n3\n");
        let e = write(dir.path(), "e", "alice carol\n");
        let opts = LoadOptions {
            id_map: Some(ids),
            ..Default::default()
        };
        let net = Network::load_with(&e, &a, &opts).unwrap();
        assert_eq!(net.neighbors(0).unwrap(), &[2]);
        let e = write(dir.path(), "e2", "alice dave\n");
        assert!(matches!(
            Network::load_with(&e, &a, &opts),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn anchors_must_be_one_to_one() {
        assert!(AnchorSet::new(vec![(0, 1), (2, 1)]).is_err());
        assert!(AnchorSet::new(vec![(0, 1), (0, 2)]).is_err());
        assert!(AnchorSet::new(vec![(0, 1), (2, 3)]).is_ok());
    }

    #[test]
    fn split_cardinalities() {
        let anchors = AnchorSet::new((0..10).map(|i| (i, i)).collect()).unwrap();
        let (train, test) = split_anchors(&anchors, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert_eq!(train_size(1118, 0.1), 112);
        assert_eq!(train_size(1118, 0.5), 559);
        assert_eq!(train_size(1118, 0.8), 894);
    }

    #[test]
    fn split_is_deterministic() {
        let anchors = AnchorSet::new((0..50).map(|i| (i, 49 - i)).collect()).unwrap();
        let a = split_anchors(&anchors, 0.5, 11).unwrap();
        let b = split_anchors(&anchors, 0.5, 11).unwrap();
        assert_eq!(a, b);
        let c = split_anchors(&anchors, 0.5, 12).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn split_rejects_empty_sides() {
        let anchors = AnchorSet::new(vec![(0, 0), (1, 1)]).unwrap();
        assert!(split_anchors(&anchors, 0.1, 0).is_err());
        assert!(split_anchors(&anchors, 0.9, 0).is_err());
        assert!(split_anchors(&AnchorSet::new(vec![]).unwrap(), 0.5, 0).is_err());
    }
}
