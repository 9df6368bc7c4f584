use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::sparse::SparseMatrix;

/// Attention weights of one layer. Row `j`, column `i` holds the weight that
/// destination `j` puts on the message from source `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerAttention {
    heads: Vec<SparseMatrix>,
    mean: SparseMatrix,
}

impl LayerAttention {
    pub fn heads(&self) -> &[SparseMatrix] {
        &self.heads
    }

    /// Uniform mean over heads.
    pub fn mean(&self) -> &SparseMatrix {
        &self.mean
    }
}

/// Per-layer attention matrices of an `L`-layer network, layers numbered
/// `1..=L` from the input side.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStack {
    layers: Vec<LayerAttention>,
}

impl AttentionStack {
    /// One matrix per layer, single head.
    pub fn from_layers(layers: Vec<SparseMatrix>) -> Result<Self> {
        Self::from_heads(layers.into_iter().map(|m| vec![m]).collect())
    }

    /// `heads[l][h]` is head `h` of layer `l + 1`.
    pub fn from_heads(heads: Vec<Vec<SparseMatrix>>) -> Result<Self> {
        let n = heads
            .first()
            .and_then(|l| l.first())
            .map(SparseMatrix::dim)
            .ok_or_else(|| Error::Dimension("attention stack needs at least one layer and head".into()))?;
        let mut layers = Vec::with_capacity(heads.len());
        for (l, hs) in heads.into_iter().enumerate() {
            if hs.is_empty() {
                return Err(Error::Dimension(format!("layer {} has no heads", l + 1)));
            }
            for m in &hs {
                if m.dim() != n {
                    return Err(Error::Dimension(format!(
                        "layer {} mixes {n}- and {}-node matrices",
                        l + 1,
                        m.dim()
                    )));
                }
                if let Some((r, c, v)) = m.entries().find(|&(_, _, v)| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::Validation(format!(
                        "attention weight {v} at layer {}, ({r}, {c}) is outside [0, 1]",
                        l + 1
                    )));
                }
            }
            let mean = SparseMatrix::mean(&hs)?;
            layers.push(LayerAttention { heads: hs, mean });
        }
        Ok(AttentionStack { layers })
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.layers[0].mean.dim()
    }

    pub fn num_heads(&self, layer: usize) -> usize {
        self.layer(layer).heads.len()
    }

    /// Layer `layer` in `1..=L`.
    pub fn layer(&self, layer: usize) -> &LayerAttention {
        assert!(
            (1..=self.layers.len()).contains(&layer),
            "layer {layer} outside 1..={}",
            self.layers.len()
        );
        &self.layers[layer - 1]
    }

    /// Head-averaged matrix of layer `layer` in `1..=L`.
    pub fn matrix(&self, layer: usize) -> &SparseMatrix {
        &self.layer(layer).mean
    }

    /// Head-averaged weight of `edge` at layer `layer` (0 if absent).
    pub fn weight(&self, layer: usize, edge: Edge) -> f64 {
        self.matrix(layer).get(edge.dst, edge.src)
    }

    pub fn layers(&self) -> &[LayerAttention] {
        &self.layers
    }

    /// Largest `|row sum - 1|` over every non-empty row of every head.
    pub fn max_row_deviation(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.heads.iter().chain(std::iter::once(&l.mean)))
            .flat_map(|m| {
                (0..m.dim())
                    .filter(|&r| m.row(r).0.len() > 0)
                    .map(move |r| (m.row_sum(r) - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Errors unless the stack covers `graph`'s nodes and every stored weight
    /// sits on a message-passing edge of `graph`.
    pub fn check_against(&self, graph: &Graph) -> Result<()> {
        if self.num_nodes() != graph.num_nodes() {
            return Err(Error::Dimension(format!(
                "attention stack has {} nodes, graph has {}",
                self.num_nodes(),
                graph.num_nodes()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for m in &layer.heads {
                for (j, i, _) in m.entries() {
                    if i != j && !graph.has_edge(Edge::new(i, j)) {
                        return Err(Error::Validation(format!(
                            "layer {} has attention on ({i}, {j}), which is not an edge",
                            l + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = StackFile {
            num_nodes: self.num_nodes(),
            layers: self
                .layers
                .iter()
                .map(|l| StackLayerFile {
                    heads: l
                        .heads
                        .iter()
                        .map(|m| m.entries().map(|(j, i, v)| (i, j, v)).collect())
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("stack serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: StackFile = serde_path_to_error::deserialize(de)
            .map_err(|err| Error::Schema(format!("at `{}`: {}", err.path(), err.inner())))?;
        let heads = file
            .layers
            .into_iter()
            .map(|l| {
                l.heads
                    .into_iter()
                    .map(|entries| {
                        SparseMatrix::from_triplets(
                            file.num_nodes,
                            entries.into_iter().map(|(i, j, v)| (j, i, v)),
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_heads(heads)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

// Entries are written as `[src, dst, weight]`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackFile {
    num_nodes: usize,
    layers: Vec<StackLayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StackLayerFile {
    heads: Vec<Vec<(usize, usize, f64)>>,
}
