//! Seeded synthetic node-classification benchmarks with ground-truth
//! explanations.
//!
//! A [`DatasetBundle`] is saved as an ordinary graph JSON file. Everything
//! else lives under `meta`: the full `generator_config` (enough to regenerate
//! the bundle bit for bit), the train/validation/test `split`, and for
//! Infection the per-target `ground_truth_paths`, the `ambiguous` targets and
//! the `infected` nodes.

mod ba_shapes;
mod infection;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ba_shapes::{generate_ba_shapes, BaShapesConfig};
pub use infection::{generate_infection, infection_labels, InfectionConfig, InfectionLabels};

use crate::attribution::stream_seed;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeId};

/// Parameters of a generator run, tagged by dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dataset", rename_all = "kebab-case")]
pub enum GeneratorConfig {
    BaShapes(BaShapesConfig),
    Infection(InfectionConfig),
}

impl GeneratorConfig {
    pub fn generate(&self) -> Result<DatasetBundle> {
        match self {
            GeneratorConfig::BaShapes(c) => c.generate(),
            GeneratorConfig::Infection(c) => c.generate(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            GeneratorConfig::BaShapes(c) => c.seed,
            GeneratorConfig::Infection(c) => c.seed,
        }
    }
}

/// Node partition into train, validation and test sets (ascending ids).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

impl Split {
    /// Uniform random partition with the given train and validation fractions.
    pub fn random(num_nodes: usize, train_frac: f64, val_frac: f64, seed: u64) -> Split {
        let mut order: Vec<NodeId> = (0..num_nodes).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (train_frac * num_nodes as f64).round() as usize;
        let n_val = ((val_frac * num_nodes as f64).round() as usize).min(num_nodes - n_train);
        let take = |range: std::ops::Range<usize>| {
            let mut part = order[range].to_vec();
            part.sort_unstable();
            part
        };
        Split {
            train: take(0..n_train),
            val: take(n_train..n_train + n_val),
            test: take(n_train + n_val..num_nodes),
        }
    }

    fn check(&self, num_nodes: usize) -> Result<()> {
        let mut seen = vec![false; num_nodes];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= num_nodes || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Validation(format!(
                    "split lists node {i} twice or out of range"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Validation("split does not cover every node".into()));
        }
        Ok(())
    }
}

/// A generated graph with its split and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    graph: Graph,
    split: Split,
    config: GeneratorConfig,
    paths: BTreeMap<NodeId, Vec<Edge>>,
    ambiguous: BTreeSet<NodeId>,
}

impl DatasetBundle {
    pub(crate) fn assemble(
        graph: Graph,
        split: Split,
        config: GeneratorConfig,
        paths: BTreeMap<NodeId, Vec<Edge>>,
        ambiguous: BTreeSet<NodeId>,
    ) -> Result<Self> {
        split.check(graph.num_nodes())?;
        Ok(DatasetBundle {
            graph,
            split,
            config,
            paths,
            ambiguous,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    /// Chosen shortest infection path per target (Infection only).
    pub fn ground_truth_paths(&self) -> &BTreeMap<NodeId, Vec<Edge>> {
        &self.paths
    }

    /// Targets with more than one shortest infection path.
    pub fn ambiguous(&self) -> &BTreeSet<NodeId> {
        &self.ambiguous
    }

    /// Targets whose explanation is scored, with their ground-truth edges:
    /// motif nodes against all motif edges for BA-Shapes, unambiguous
    /// infection targets against their path for Infection.
    pub fn explanation_targets(&self) -> BTreeMap<NodeId, BTreeSet<Edge>> {
        match &self.config {
            GeneratorConfig::BaShapes(_) => {
                let gt = self.graph.ground_truth().cloned().unwrap_or_default();
                let labels = self.graph.labels().unwrap_or(&[]);
                labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l != 0)
                    .map(|(v, _)| (v, gt.clone()))
                    .collect()
            }
            GeneratorConfig::Infection(_) => self
                .paths
                .iter()
                .filter(|(v, _)| !self.ambiguous.contains(v))
                .map(|(&v, p)| (v, p.iter().copied().collect()))
                .collect(),
        }
    }

    /// The graph with generation metadata folded into `meta`.
    pub fn to_graph(&self) -> Graph {
        let mut meta = self.graph.meta().clone();
        meta.insert(
            "generator_config".into(),
            serde_json::to_value(&self.config).expect("config serializes"),
        );
        meta.insert(
            "split".into(),
            serde_json::to_value(&self.split).expect("split serializes"),
        );
        if let GeneratorConfig::Infection(_) = self.config {
            meta.insert(
                "ground_truth_paths".into(),
                serde_json::to_value(&self.paths).expect("paths serialize"),
            );
            meta.insert(
                "ambiguous".into(),
                serde_json::to_value(&self.ambiguous).expect("set serializes"),
            );
        }
        rebuild_with_meta(&self.graph, meta)
    }

    /// Recovers a bundle from a graph carrying generation metadata.
    pub fn from_graph(graph: Graph) -> Result<Self> {
        let meta = graph.meta();
        let field = |name: &str| {
            meta.get(name)
                .cloned()
                .ok_or_else(|| Error::Schema(format!("at `meta.{name}`: missing field")))
        };
        let parse_err = |name: &str, e: serde_json::Error| Error::Schema(format!("at `meta.{name}`: {e}"));
        let config: GeneratorConfig = serde_json::from_value(field("generator_config")?)
            .map_err(|e| parse_err("generator_config", e))?;
        let split: Split =
            serde_json::from_value(field("split")?).map_err(|e| parse_err("split", e))?;
        let (paths, ambiguous) = match config {
            GeneratorConfig::Infection(_) => (
                serde_json::from_value(field("ground_truth_paths")?)
                    .map_err(|e| parse_err("ground_truth_paths", e))?,
                serde_json::from_value(field("ambiguous")?).map_err(|e| parse_err("ambiguous", e))?,
            ),
            GeneratorConfig::BaShapes(_) => (BTreeMap::new(), BTreeSet::new()),
        };
        let mut stripped = meta.clone();
        for key in ["generator_config", "split", "ground_truth_paths", "ambiguous"] {
            stripped.remove(key);
        }
        let graph = rebuild_with_meta(&graph, stripped);
        DatasetBundle::assemble(graph, split, config, paths, ambiguous)
    }

    pub fn to_json(&self) -> String {
        self.to_graph().to_json()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_graph().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_graph(crate::graph::load_graph(path)?)
    }
}

fn rebuild_with_meta(g: &Graph, meta: serde_json::Map<String, serde_json::Value>) -> Graph {
    let mut b = Graph::builder(g.num_nodes())
        .undirected(g.is_undirected())
        .edges(g.edges().iter().copied())
        .features(g.features().to_vec())
        .meta(meta);
    if let Some(l) = g.labels() {
        b = b.labels(l.to_vec());
    }
    if let Some(gt) = g.ground_truth() {
        b = b.ground_truth(gt.iter().copied());
    }
    if let Some(ids) = g.node_ids() {
        b = b.node_ids(ids.to_vec());
    }
    b.build().expect("parts come from a valid graph")
}

pub(crate) fn component_rng(seed: u64, component: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, component))
}
