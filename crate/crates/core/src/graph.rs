//! Directed graphs with node features, labels and optional ground-truth
//! explanation edges.
//!
//! Node indices are dense and 0-based. Edges are stored sorted by
//! `(src, dst)`; an undirected graph stores both arcs of every edge.
//! In-adjacency is indexed at construction, so every neighborhood query used
//! by message passing is a slice lookup.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense node index.
pub type NodeId = usize;

/// A directed edge `src -> dst`. Messages flow from `src` into `dst`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
}

impl Edge {
    pub const fn new(src: NodeId, dst: NodeId) -> Self {
        Edge { src, dst }
    }

    pub const fn self_loop(node: NodeId) -> Self {
        Edge {
            src: node,
            dst: node,
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }

    pub fn reversed(&self) -> Self {
        Edge {
            src: self.dst,
            dst: self.src,
        }
    }
}

impl From<[usize; 2]> for Edge {
    fn from([src, dst]: [usize; 2]) -> Self {
        Edge { src, dst }
    }
}

impl From<Edge> for [usize; 2] {
    fn from(e: Edge) -> Self {
        [e.src, e.dst]
    }
}

impl From<(usize, usize)> for Edge {
    fn from((src, dst): (usize, usize)) -> Self {
        Edge { src, dst }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.src, self.dst)
    }
}

/// An immutable directed graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    undirected: bool,
    features: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
    edges: Vec<Edge>,
    ground_truth: Option<BTreeSet<Edge>>,
    node_ids: Option<Vec<String>>,
    meta: serde_json::Map<String, serde_json::Value>,
    // in-adjacency (CSR over destinations, sources ascending)
    in_offsets: Vec<usize>,
    in_sources: Vec<NodeId>,
}

/// Collects the parts of a [`Graph`] and validates them in [`GraphBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    num_nodes: usize,
    undirected: bool,
    edges: Vec<Edge>,
    features: Option<Vec<Vec<f64>>>,
    labels: Option<Vec<usize>>,
    ground_truth: Option<Vec<Edge>>,
    node_ids: Option<Vec<String>>,
    meta: serde_json::Map<String, serde_json::Value>,
}

impl GraphBuilder {
    pub fn new(num_nodes: usize) -> Self {
        GraphBuilder {
            num_nodes,
            ..Default::default()
        }
    }

    /// Marks the graph undirected; [`build`](Self::build) adds the reverse
    /// arc of every edge.
    pub fn undirected(mut self, undirected: bool) -> Self {
        self.undirected = undirected;
        self
    }

    pub fn edges<I, E>(mut self, edges: I) -> Self
    where
        I: IntoIterator<Item = E>,
        E: Into<Edge>,
    {
        self.edges = edges.into_iter().map(Into::into).collect();
        self
    }

    /// Per-node feature rows. Defaults to the constant feature `[1.0]`.
    pub fn features(mut self, features: Vec<Vec<f64>>) -> Self {
        self.features = Some(features);
        self
    }

    pub fn labels(mut self, labels: Vec<usize>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn ground_truth<I, E>(mut self, edges: I) -> Self
    where
        I: IntoIterator<Item = E>,
        E: Into<Edge>,
    {
        self.ground_truth = Some(edges.into_iter().map(Into::into).collect());
        self
    }

    pub fn node_ids(mut self, ids: Vec<String>) -> Self {
        self.node_ids = Some(ids);
        self
    }

    pub fn meta(mut self, meta: serde_json::Map<String, serde_json::Value>) -> Self {
        self.meta = meta;
        self
    }

    pub fn build(self) -> Result<Graph> {
        let n = self.num_nodes;
        let check = |e: &Edge, what: &str| -> Result<()> {
            for node in [e.src, e.dst] {
                if node >= n {
                    return Err(Error::Validation(format!(
                        "{what} {e} references node {node}, but num_nodes is {n}"
                    )));
                }
            }
            Ok(())
        };

        let mut seen = BTreeSet::new();
        for e in &self.edges {
            check(e, "edge")?;
            if !seen.insert(*e) {
                return Err(Error::Validation(format!("duplicate edge {e}")));
            }
        }
        if self.undirected {
            for e in &self.edges {
                seen.insert(e.reversed());
            }
        }
        let edges: Vec<Edge> = seen.into_iter().collect();

        let features = match self.features {
            Some(f) => {
                if f.len() != n {
                    return Err(Error::Validation(format!(
                        "features has {} rows, expected {n}",
                        f.len()
                    )));
                }
                let dim = f.first().map_or(0, Vec::len);
                for (i, row) in f.iter().enumerate() {
                    if row.len() != dim {
                        return Err(Error::Validation(format!(
                            "features[{i}] has length {}, expected {dim}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite(format!("features[{i}]")));
                    }
                }
                f
            }
            None => vec![vec![1.0]; n],
        };

        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "labels has {} entries, expected {n}",
                    labels.len()
                )));
            }
        }

        let ground_truth = match self.ground_truth {
            Some(gt) => {
                let mut set = BTreeSet::new();
                for e in gt {
                    check(&e, "ground_truth_edges entry")?;
                    if edges.binary_search(&e).is_err() {
                        return Err(Error::Validation(format!(
                            "ground_truth_edges entry {e} is not an edge of the graph"
                        )));
                    }
                    set.insert(e);
                }
                Some(set)
            }
            None => None,
        };

        if let Some(ids) = &self.node_ids {
            if ids.len() != n {
                return Err(Error::Validation(format!(
                    "node_ids has {} entries, expected {n}",
                    ids.len()
                )));
            }
        }

        let mut in_offsets = vec![0usize; n + 1];
        for e in &edges {
            in_offsets[e.dst + 1] += 1;
        }
        for i in 0..n {
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut cursor = in_offsets.clone();
        let mut in_sources = vec![0usize; edges.len()];
        // edges are sorted by src, so each destination's sources come out ascending
        for e in &edges {
            in_sources[cursor[e.dst]] = e.src;
            cursor[e.dst] += 1;
        }

        Ok(Graph {
            num_nodes: n,
            undirected: self.undirected,
            features,
            labels: self.labels,
            edges,
            ground_truth,
            node_ids: self.node_ids,
            meta: self.meta,
            in_offsets,
            in_sources,
        })
    }
}

impl Graph {
    pub fn builder(num_nodes: usize) -> GraphBuilder {
        GraphBuilder::new(num_nodes)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    /// Edges in lexicographic `(src, dst)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        e.dst < self.num_nodes && self.in_sources(e.dst).binary_search(&e.src).is_ok()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    pub fn ground_truth(&self) -> Option<&BTreeSet<Edge>> {
        self.ground_truth.as_ref()
    }

    pub fn node_ids(&self) -> Option<&[String]> {
        self.node_ids.as_deref()
    }

    pub fn meta(&self) -> &serde_json::Map<String, serde_json::Value> {
        &self.meta
    }

    /// Sources of the edges entering `dst`, ascending.
    pub fn in_sources(&self, dst: NodeId) -> &[NodeId] {
        &self.in_sources[self.in_offsets[dst]..self.in_offsets[dst + 1]]
    }

    pub fn in_degree(&self, dst: NodeId) -> usize {
        self.in_offsets[dst + 1] - self.in_offsets[dst]
    }

    /// Sources feeding `dst` during attention message passing: the in-neighbors
    /// plus `dst` itself, ascending. The self-loop is included whether or not
    /// the graph stores it.
    pub fn message_sources(&self, dst: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let srcs = self.in_sources(dst);
        let split = srcs.partition_point(|&s| s < dst);
        let missing_self = srcs.get(split) != Some(&dst);
        srcs[..split]
            .iter()
            .copied()
            .chain(missing_self.then_some(dst))
            .chain(srcs[split..].iter().copied())
    }

    pub fn has_all_self_loops(&self) -> bool {
        (0..self.num_nodes).all(|i| self.has_edge(Edge::self_loop(i)))
    }

    pub(crate) fn check_node(&self, node: NodeId) -> Result<()> {
        if node < self.num_nodes {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node,
                num_nodes: self.num_nodes,
            })
        }
    }

    /// Returns the graph with `(i, i)` added for every node. Idempotent.
    pub fn add_self_loops(&self) -> Graph {
        if self.has_all_self_loops() {
            return self.clone();
        }
        let mut edges: BTreeSet<Edge> = self.edges.iter().copied().collect();
        edges.extend((0..self.num_nodes).map(Edge::self_loop));
        self.with_edges(edges.into_iter().collect())
    }

    // `edges` must be sorted, unique, in range and a superset of ground truth
    fn with_edges(&self, edges: Vec<Edge>) -> Graph {
        let mut b = GraphBuilder::new(self.num_nodes)
            .edges(edges)
            .features(self.features.clone())
            .meta(self.meta.clone());
        if let Some(l) = &self.labels {
            b = b.labels(l.clone());
        }
        if let Some(gt) = &self.ground_truth {
            b = b.ground_truth(gt.iter().copied());
        }
        if let Some(ids) = &self.node_ids {
            b = b.node_ids(ids.clone());
        }
        let mut g = b.build().expect("edges derived from a valid graph");
        g.undirected = self.undirected;
        g
    }

    /// Hop distance from every node to `target` along edge direction (with
    /// implicit self-loops), searched up to `max_depth`. Unreached nodes map
    /// to `None`.
    pub fn distances_to(&self, target: NodeId, max_depth: usize) -> Result<Vec<Option<usize>>> {
        self.check_node(target)?;
        let mut dist = vec![None; self.num_nodes];
        dist[target] = Some(0);
        let mut queue = VecDeque::from([target]);
        while let Some(j) = queue.pop_front() {
            let d = dist[j].expect("queued nodes have a distance");
            if d == max_depth {
                continue;
            }
            for &i in self.in_sources(j) {
                if dist[i].is_none() {
                    dist[i] = Some(d + 1);
                    queue.push_back(i);
                }
            }
        }
        Ok(dist)
    }

    /// Directed edges that occur in at least one flow of length `<= k` ending
    /// at `target`: every message-passing edge `(i, j)` whose destination is
    /// within `k - 1` hops of `target`. Self-loops are included.
    pub fn k_hop_edge_set(&self, target: NodeId, k: usize) -> Result<BTreeSet<Edge>> {
        if k == 0 {
            return Err(Error::OutOfRange("k_hop_edge_set depth 0".into()));
        }
        let dist = self.distances_to(target, k - 1)?;
        let mut out = BTreeSet::new();
        for (j, d) in dist.iter().enumerate() {
            if d.is_some() {
                out.extend(self.message_sources(j).map(|i| Edge::new(i, j)));
            }
        }
        Ok(out)
    }

    /// Serializes to the canonical graph JSON document.
    pub fn to_json(&self) -> String {
        let file = GraphFile {
            num_nodes: self.num_nodes,
            undirected: self.undirected,
            features: self.features.clone(),
            labels: self.labels.clone(),
            node_ids: self.node_ids.clone(),
            edges: self.edges.iter().map(|&e| NodeRefEdge::from(e)).collect(),
            ground_truth_edges: self
                .ground_truth
                .as_ref()
                .map(|gt| gt.iter().map(|&e| NodeRefEdge::from(e)).collect()),
            meta: self.meta.clone(),
        };
        serde_json::to_string(&file).expect("graph serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Graph> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: GraphFile = serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            Error::Schema(format!("at `{path}`: {}", err.inner()))
        })?;
        file.into_graph()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a graph JSON file.
pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Graph::from_json(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    num_nodes: usize,
    #[serde(default)]
    undirected: bool,
    features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_ids: Option<Vec<String>>,
    edges: Vec<NodeRefEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth_edges: Option<Vec<NodeRefEdge>>,
    #[serde(default)]
    meta: serde_json::Map<String, serde_json::Value>,
}

/// An edge endpoint given either as a dense index or as an external id listed
/// in `node_ids`.
#[derive(Serialize, Deserialize, Clone)]
#[serde(untagged)]
enum NodeRef {
    Index(usize),
    Id(String),
}

#[derive(Serialize, Deserialize, Clone)]
struct NodeRefEdge(NodeRef, NodeRef);

impl From<Edge> for NodeRefEdge {
    fn from(e: Edge) -> Self {
        NodeRefEdge(NodeRef::Index(e.src), NodeRef::Index(e.dst))
    }
}

impl GraphFile {
    fn into_graph(self) -> Result<Graph> {
        let lookup: Option<BTreeMap<&str, usize>> = self.node_ids.as_ref().map(|ids| {
            ids.iter()
                .enumerate()
                .map(|(i, s)| (s.as_str(), i))
                .collect()
        });
        let resolve = |r: &NodeRef, field: &str| -> Result<usize> {
            match r {
                NodeRef::Index(i) => Ok(*i),
                NodeRef::Id(s) => lookup
                    .as_ref()
                    .and_then(|m| m.get(s.as_str()).copied())
                    .ok_or_else(|| {
                        Error::Schema(format!("at `{field}`: unknown node id {s:?}"))
                    }),
            }
        };
        let resolve_all = |list: &[NodeRefEdge], field: &str| -> Result<Vec<Edge>> {
            list.iter()
                .enumerate()
                .map(|(k, NodeRefEdge(a, b))| {
                    let f = format!("{field}[{k}]");
                    Ok(Edge::new(resolve(a, &f)?, resolve(b, &f)?))
                })
                .collect()
        };
        let edges = resolve_all(&self.edges, "edges")?;
        let mut b = GraphBuilder::new(self.num_nodes)
            .undirected(self.undirected)
            .features(self.features)
            .meta(self.meta);
        if self.undirected {
            // both arcs may already be listed; materialization dedups them
            let mut unique = BTreeSet::new();
            for e in &edges {
                if !unique.insert(*e) {
                    return Err(Error::Validation(format!("duplicate edge {e}")));
                }
            }
            let canonical: Vec<Edge> = unique
                .iter()
                .copied()
                .filter(|e| e.src <= e.dst || !unique.contains(&e.reversed()))
                .collect();
            b = b.edges(canonical);
        } else {
            b = b.edges(edges);
        }
        if let Some(gt) = &self.ground_truth_edges {
            b = b.ground_truth(resolve_all(gt, "ground_truth_edges")?);
        }
        if let Some(l) = self.labels {
            b = b.labels(l);
        }
        if let Some(ids) = self.node_ids {
            b = b.node_ids(ids);
        }
        b.build()
    }
}
