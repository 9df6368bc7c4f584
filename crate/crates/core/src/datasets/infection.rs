use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{component_rng, DatasetBundle, GeneratorConfig, Split};
use crate::attribution::stream_seed;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfectionConfig {
    pub seed: u64,
    pub n_nodes: usize,
    pub edge_prob: f64,
    pub n_infected: usize,
    /// Distance cap; labels run `0..=max_dist`.
    pub max_dist: usize,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl InfectionConfig {
    pub fn new(seed: u64) -> Self {
        InfectionConfig {
            seed,
            n_nodes: 1000,
            edge_prob: 0.004,
            n_infected: 50,
            max_dist: 4,
            train_frac: 0.8,
            val_frac: 0.1,
        }
    }

    pub fn generate(&self) -> Result<DatasetBundle> {
        generate_infection(self)
    }
}

/// Distance labels and explanation paths for a fixed set of infected nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct InfectionLabels {
    pub labels: Vec<usize>,
    /// One shortest path (directed toward the target) for every target with
    /// `1 <= label < max_dist`.
    pub paths: BTreeMap<NodeId, Vec<Edge>>,
    /// Targets reachable by more than one shortest path.
    pub ambiguous: BTreeSet<NodeId>,
}

/// Multi-source BFS from the infected nodes along edge direction. A node's
/// label is its distance to the nearest infected node, capped at `max_dist`.
/// The chosen path always steps back through the lowest-index predecessor.
pub fn infection_labels(graph: &Graph, infected: &[NodeId], max_dist: usize) -> Result<InfectionLabels> {
    let n = graph.num_nodes();
    let mut out_adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for e in graph.edges() {
        if !e.is_self_loop() {
            out_adj[e.src].push(e.dst);
        }
    }
    let mut dist: Vec<Option<usize>> = vec![None; n];
    // number of shortest paths, saturating at 2
    let mut paths_count = vec![0u8; n];
    let mut queue = VecDeque::new();
    for &i in infected {
        graph.check_node(i)?;
        if dist[i].is_none() {
            dist[i] = Some(0);
            paths_count[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(u) = queue.pop_front() {
        let d = dist[u].expect("queued");
        for &w in &out_adj[u] {
            match dist[w] {
                None => {
                    dist[w] = Some(d + 1);
                    paths_count[w] = paths_count[u];
                    queue.push_back(w);
                }
                Some(dw) if dw == d + 1 => {
                    paths_count[w] = (paths_count[w] + paths_count[u]).min(2);
                }
                _ => {}
            }
        }
    }

    let labels: Vec<usize> = dist
        .iter()
        .map(|d| d.map_or(max_dist, |d| d.min(max_dist)))
        .collect();
    let mut paths = BTreeMap::new();
    let mut ambiguous = BTreeSet::new();
    for v in 0..n {
        let Some(d) = dist[v] else { continue };
        if d == 0 || d >= max_dist {
            continue;
        }
        let mut path = Vec::with_capacity(d);
        let mut cur = v;
        while dist[cur] != Some(0) {
            let prev = graph
                .in_sources(cur)
                .iter()
                .copied()
                .find(|&p| p != cur && dist[p].is_some_and(|dp| dp + 1 == dist[cur].expect("on path")))
                .expect("every reached node has a predecessor");
            path.push(Edge::new(prev, cur));
            cur = prev;
        }
        path.reverse();
        if paths_count[v] > 1 {
            ambiguous.insert(v);
        }
        paths.insert(v, path);
    }
    Ok(InfectionLabels {
        labels,
        paths,
        ambiguous,
    })
}

/// Erdős–Rényi graph with randomly infected nodes. Features are the one-hot
/// infection indicator `[infected, healthy]`.
pub fn generate_infection(cfg: &InfectionConfig) -> Result<DatasetBundle> {
    if !(cfg.edge_prob > 0.0 && cfg.edge_prob < 1.0) {
        return Err(Error::Validation(format!("edge_prob must be in (0, 1), got {}", cfg.edge_prob)));
    }
    if cfg.n_infected == 0 || cfg.n_infected > cfg.n_nodes {
        return Err(Error::Validation(format!(
            "n_infected must be in 1..={}, got {}",
            cfg.n_nodes, cfg.n_infected
        )));
    }
    if cfg.max_dist == 0 {
        return Err(Error::Validation("max_dist must be at least 1".into()));
    }
    let n = cfg.n_nodes;
    let mut rng = component_rng(cfg.seed, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < cfg.edge_prob {
                edges.push((i, j));
            }
        }
    }
    let mut infected: Vec<NodeId> = sample(&mut rng, n, cfg.n_infected).into_vec();
    infected.sort_unstable();

    let mut features = vec![vec![0.0, 1.0]; n];
    for &i in &infected {
        features[i] = vec![1.0, 0.0];
    }
    let skeleton = Graph::builder(n).undirected(true).edges(edges).build()?;
    let InfectionLabels {
        labels,
        paths,
        ambiguous,
    } = infection_labels(&skeleton, &infected, cfg.max_dist)?;
    let ground_truth: BTreeSet<Edge> = paths.values().flatten().copied().collect();

    let mut meta = serde_json::Map::new();
    meta.insert("infected".into(), serde_json::to_value(&infected).expect("ids serialize"));
    let graph = Graph::builder(n)
        .undirected(true)
        .edges(skeleton.edges().iter().copied())
        .features(features)
        .labels(labels)
        .ground_truth(ground_truth)
        .meta(meta)
        .build()?;
    let split = Split::random(n, cfg.train_frac, cfg.val_frac, stream_seed(cfg.seed, 1));
    DatasetBundle::assemble(graph, split, GeneratorConfig::Infection(cfg.clone()), paths, ambiguous)
}
