use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{component_rng, DatasetBundle, GeneratorConfig, Split};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};

/// Node label of each house position: apex, two middle nodes, two bottom nodes.
const HOUSE_ROLES: [usize; 5] = [1, 2, 2, 3, 3];
/// Undirected house edges over the positions above: roof, square.
const HOUSE_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaShapesConfig {
    pub seed: u64,
    pub n_base: usize,
    pub n_motifs: usize,
    /// Edges each new base node attaches with.
    pub m_attach: usize,
    /// Extra uniformly random edges; `None` means 10% of the node count.
    pub n_random_edges: Option<usize>,
    pub feature_dim: usize,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl BaShapesConfig {
    pub fn new(seed: u64) -> Self {
        BaShapesConfig {
            seed,
            n_base: 300,
            n_motifs: 80,
            m_attach: 1,
            n_random_edges: None,
            feature_dim: 10,
            train_frac: 0.8,
            val_frac: 0.1,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n_base + 5 * self.n_motifs
    }

    pub fn generate(&self) -> Result<DatasetBundle> {
        generate_ba_shapes(self)
    }
}

/// Barabási–Albert preferential attachment: a star on `m + 1` nodes, then each
/// new node links to `m` distinct existing nodes drawn proportionally to degree.
fn barabasi_albert(n: usize, m: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..=m).map(|leaf| (0, leaf)).collect();
    let mut repeated: Vec<usize> = Vec::new();
    for &(a, b) in &edges {
        repeated.push(a);
        repeated.push(b);
    }
    for source in (m + 1)..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            targets.insert(repeated[rng.random_range(0..repeated.len())]);
        }
        for &t in &targets {
            edges.push((t, source));
            repeated.push(t);
            repeated.push(source);
        }
    }
    edges
}

/// A Barabási–Albert base graph with house motifs attached, plus random noise
/// edges. Labels: 0 base, 1 apex, 2 middle, 3 bottom. Ground truth is the 12
/// directed arcs inside each house; attachment and noise edges are not.
pub fn generate_ba_shapes(cfg: &BaShapesConfig) -> Result<DatasetBundle> {
    if cfg.n_base < 5 {
        return Err(Error::Validation(format!("n_base must be at least 5, got {}", cfg.n_base)));
    }
    if cfg.m_attach == 0 || cfg.m_attach >= cfg.n_base {
        return Err(Error::Validation(format!(
            "m_attach must be in 1..{}, got {}",
            cfg.n_base, cfg.m_attach
        )));
    }
    if cfg.feature_dim == 0 {
        return Err(Error::Validation("feature_dim must be positive".into()));
    }
    let n = cfg.num_nodes();
    let mut rng = component_rng(cfg.seed, 0);

    let mut undirected: BTreeSet<(usize, usize)> = BTreeSet::new();
    fn add(a: usize, b: usize, set: &mut BTreeSet<(usize, usize)>) -> bool {
        set.insert((a.min(b), a.max(b)))
    }
    for (a, b) in barabasi_albert(cfg.n_base, cfg.m_attach, &mut rng) {
        add(a, b, &mut undirected);
    }

    let mut labels = vec![0usize; n];
    let mut ground_truth = Vec::with_capacity(12 * cfg.n_motifs);
    for k in 0..cfg.n_motifs {
        let offset = cfg.n_base + 5 * k;
        for (pos, &role) in HOUSE_ROLES.iter().enumerate() {
            labels[offset + pos] = role;
        }
        for &(a, b) in &HOUSE_EDGES {
            add(offset + a, offset + b, &mut undirected);
            ground_truth.push(Edge::new(offset + a, offset + b));
            ground_truth.push(Edge::new(offset + b, offset + a));
        }
        let anchor = offset + rng.random_range(0..5);
        let base = rng.random_range(0..cfg.n_base);
        add(anchor, base, &mut undirected);
    }

    let n_random = cfg
        .n_random_edges
        .unwrap_or_else(|| (0.1 * n as f64).round() as usize);
    let max_edges = n * (n - 1) / 2;
    if undirected.len() + n_random > max_edges {
        return Err(Error::Validation(format!(
            "cannot add {n_random} random edges to a {n}-node graph with {} edges",
            undirected.len()
        )));
    }
    let mut added = 0;
    while added < n_random {
        let pair = sample(&mut rng, n, 2);
        if add(pair.index(0), pair.index(1), &mut undirected) {
            added += 1;
        }
    }

    let mut config = cfg.clone();
    config.n_random_edges = Some(n_random);
    let graph = Graph::builder(n)
        .undirected(true)
        .edges(undirected)
        .features(vec![vec![1.0; cfg.feature_dim]; n])
        .labels(labels)
        .ground_truth(ground_truth)
        .build()?;
    let split = Split::random(n, cfg.train_frac, cfg.val_frac, crate::attribution::stream_seed(cfg.seed, 1));
    DatasetBundle::assemble(
        graph,
        split,
        GeneratorConfig::BaShapes(config),
        BTreeMap::new(),
        BTreeSet::new(),
    )
}
