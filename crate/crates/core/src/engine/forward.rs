use crate::dense::{dot, Matrix};
use crate::engine::model::{GatModel, HeadMerge, LayerParams};
use crate::engine::stack::AttentionStack;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeId};
use crate::sparse::SparseMatrix;

/// Softmax support of every destination: CSR over destinations with sources
/// ascending.
#[derive(Clone, Debug)]
pub(crate) struct Support {
    offsets: Vec<usize>,
    sources: Vec<NodeId>,
}

impl Support {
    pub(crate) fn full(graph: &Graph) -> Result<Self> {
        if !graph.has_all_self_loops() {
            return Err(Error::MissingSelfLoops);
        }
        let n = graph.num_nodes();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut sources = Vec::with_capacity(graph.num_edges());
        offsets.push(0);
        for j in 0..n {
            sources.extend_from_slice(graph.in_sources(j));
            offsets.push(sources.len());
        }
        Ok(Support { offsets, sources })
    }

    /// The graph's support with `erased` removed.
    pub(crate) fn without(graph: &Graph, erased: Edge) -> Result<Self> {
        check_erasable(graph, erased)?;
        let mut s = Self::full(graph)?;
        let span = s.offsets[erased.dst]..s.offsets[erased.dst + 1];
        let pos = span.start
            + s.sources[span]
                .binary_search(&erased.src)
                .expect("erasable edge is present");
        s.sources.remove(pos);
        for o in &mut s.offsets[erased.dst + 1..] {
            *o -= 1;
        }
        Ok(s)
    }

    pub(crate) fn from_parts(offsets: Vec<usize>, sources: Vec<NodeId>) -> Self {
        Support { offsets, sources }
    }

    pub(crate) fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub(crate) fn num_edges(&self) -> usize {
        self.sources.len()
    }

    pub(crate) fn span(&self, dst: NodeId) -> std::ops::Range<usize> {
        self.offsets[dst]..self.offsets[dst + 1]
    }

    pub(crate) fn sources(&self) -> &[NodeId] {
        &self.sources
    }
}

fn check_erasable(graph: &Graph, erased: Edge) -> Result<()> {
    if !graph.has_edge(erased) {
        return Err(Error::EdgeNotInSupport(erased));
    }
    if graph.in_degree(erased.dst) == 1 {
        return Err(Error::DegenerateSoftmax { edge: erased });
    }
    Ok(())
}

/// Intermediate values of one head, kept for attention extraction and
/// backpropagation. Per-edge vectors follow the support's CSR order.
#[derive(Clone, Debug)]
pub(crate) struct HeadCache {
    pub z: Matrix,
    /// pre-LeakyReLU attention logits
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct LayerCache {
    pub input: Matrix,
    pub heads: Vec<HeadCache>,
    /// merged head outputs before the activation
    pub merged: Matrix,
    pub output: Matrix,
}

pub(crate) fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn layer_forward(layer: &LayerParams, support: &Support, input: Matrix) -> LayerCache {
    let n = support.num_nodes();
    let head_dim = layer.head_dim();
    let num_heads = layer.heads.len();
    let mut merged = Matrix::zeros(n, layer.out_dim());
    let mut heads = Vec::with_capacity(num_heads);
    for (h, params) in layer.heads.iter().enumerate() {
        let z = input.matmul(&params.weight);
        let s_src: Vec<f64> = (0..n).map(|i| dot(&params.att_src, z.row(i))).collect();
        let s_dst: Vec<f64> = (0..n).map(|j| dot(&params.att_dst, z.row(j))).collect();
        let mut u = vec![0.0; support.num_edges()];
        let mut alpha = vec![0.0; support.num_edges()];
        for j in 0..n {
            let span = support.span(j);
            let srcs = &support.sources()[span.clone()];
            let mut max = f64::NEG_INFINITY;
            for (k, &i) in span.clone().zip(srcs) {
                u[k] = s_src[i] + s_dst[j];
                max = max.max(leaky_relu(u[k], layer.leaky_slope));
            }
            let mut total = 0.0;
            for k in span.clone() {
                let w = (leaky_relu(u[k], layer.leaky_slope) - max).exp();
                alpha[k] = w;
                total += w;
            }
            for k in span.clone() {
                alpha[k] /= total;
            }
            let (offset, scale) = match layer.head_merge {
                HeadMerge::Concat => (h * head_dim, 1.0),
                HeadMerge::Average => (0, 1.0 / num_heads as f64),
            };
            let out = &mut merged.row_mut(j)[offset..offset + head_dim];
            for (k, &i) in span.zip(srcs) {
                let a = alpha[k] * scale;
                for (o, &zi) in out.iter_mut().zip(z.row(i)) {
                    *o += a * zi;
                }
            }
        }
        heads.push(HeadCache {
            z,
            u,
            alpha,
        });
    }
    let act = layer.activation;
    let output = Matrix::from_fn(n, merged.cols(), |r, c| act.apply(merged[(r, c)]));
    LayerCache {
        input,
        heads,
        merged,
        output,
    }
}

pub(crate) fn run_layers(model: &GatModel, support: &Support, features: Matrix) -> Vec<LayerCache> {
    let mut caches: Vec<LayerCache> = Vec::with_capacity(model.num_layers());
    let mut input = features;
    for layer in model.layers() {
        let cache = layer_forward(layer, support, input);
        input = cache.output.clone();
        caches.push(cache);
    }
    caches
}

pub(crate) fn check_inputs(model: &GatModel, graph: &Graph) -> Result<()> {
    if graph.feature_dim() != model.in_dim() {
        return Err(Error::Dimension(format!(
            "graph has {}-dimensional features, model expects {}",
            graph.feature_dim(),
            model.in_dim()
        )));
    }
    Ok(())
}

/// Class logits and probabilities for every node.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    logits: Matrix,
    probs: Matrix,
}

impl Prediction {
    pub(crate) fn from_logits(logits: Matrix) -> Self {
        let probs = Matrix::from_fn(logits.rows(), logits.cols(), |_, _| 0.0);
        let mut p = Prediction { logits, probs };
        for r in 0..p.logits.rows() {
            let row = softmax(p.logits.row(r));
            p.probs.row_mut(r).copy_from_slice(&row);
        }
        p
    }

    pub fn num_nodes(&self) -> usize {
        self.logits.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.logits.cols()
    }

    pub fn logits(&self, node: NodeId) -> &[f64] {
        self.logits.row(node)
    }

    pub fn probs(&self, node: NodeId) -> &[f64] {
        self.probs.row(node)
    }

    /// Predicted class; ties go to the lowest index.
    pub fn argmax(&self, node: NodeId) -> usize {
        argmax(self.probs(node))
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn stack_from_caches(caches: &[LayerCache], support: &Support) -> Result<AttentionStack> {
    let n = support.num_nodes();
    let heads = caches
        .iter()
        .map(|cache| {
            cache
                .heads
                .iter()
                .map(|head| {
                    let triplets = (0..n).flat_map(|j| {
                        let span = support.span(j);
                        span.map(move |k| (j, support.sources()[k], head.alpha[k]))
                    });
                    SparseMatrix::from_triplets(n, triplets)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    AttentionStack::from_heads(heads)
}

fn features_matrix(graph: &Graph) -> Matrix {
    Matrix::from_rows(graph.features())
}

/// Runs the network on a self-looped graph and returns predictions together
/// with every layer's attention.
pub fn forward(model: &GatModel, graph: &Graph) -> Result<(Prediction, AttentionStack)> {
    check_inputs(model, graph)?;
    let support = Support::full(graph)?;
    let caches = run_layers(model, &support, features_matrix(graph));
    let stack = stack_from_caches(&caches, &support)?;
    let logits = caches.into_iter().last().expect("non-empty").output;
    Ok((Prediction::from_logits(logits), stack))
}

pub fn predict(model: &GatModel, graph: &Graph) -> Result<Prediction> {
    check_inputs(model, graph)?;
    let support = Support::full(graph)?;
    let caches = run_layers(model, &support, features_matrix(graph));
    let logits = caches.into_iter().last().expect("non-empty").output;
    Ok(Prediction::from_logits(logits))
}

pub fn extract_attention(model: &GatModel, graph: &Graph) -> Result<AttentionStack> {
    forward(model, graph).map(|(_, stack)| stack)
}

/// Forward pass with `erased` removed from the softmax support of its
/// destination at every layer; the remaining weights renormalize.
pub fn forward_with_erasure(model: &GatModel, graph: &Graph, erased: Edge) -> Result<Prediction> {
    check_inputs(model, graph)?;
    let support = Support::without(graph, erased)?;
    let caches = run_layers(model, &support, features_matrix(graph));
    let logits = caches.into_iter().last().expect("non-empty").output;
    Ok(Prediction::from_logits(logits))
}

/// Nodes and edges that determine the output at `target`: every node within
/// `depth` hops, every in-edge of nodes within `depth - 1` hops, and bare
/// self-loops on the outermost ring. Local indices preserve global order.
pub(crate) struct ReceptiveField {
    local: Vec<Option<usize>>,
    support: Support,
    features: Matrix,
}

impl ReceptiveField {
    pub(crate) fn new(graph: &Graph, target: NodeId, depth: usize) -> Result<Self> {
        if !graph.has_all_self_loops() {
            return Err(Error::MissingSelfLoops);
        }
        let dist = graph.distances_to(target, depth)?;
        let nodes: Vec<NodeId> = (0..graph.num_nodes()).filter(|&i| dist[i].is_some()).collect();
        let mut local = vec![None; graph.num_nodes()];
        for (k, &i) in nodes.iter().enumerate() {
            local[i] = Some(k);
        }
        let mut offsets = vec![0];
        let mut sources = Vec::new();
        for &j in &nodes {
            if dist[j].expect("in field") < depth {
                sources.extend(graph.in_sources(j).iter().map(|&i| local[i].expect("within depth")));
            } else {
                sources.push(local[j].expect("in field"));
            }
            offsets.push(sources.len());
        }
        let rows: Vec<Vec<f64>> = nodes.iter().map(|&i| graph.features()[i].clone()).collect();
        Ok(ReceptiveField {
            local,
            support: Support::from_parts(offsets, sources),
            features: Matrix::from_rows(&rows),
        })
    }

    /// Class probabilities of `target` with `erased` removed from the support.
    /// Edges outside the field cannot influence the target and are ignored.
    pub(crate) fn probs_with_erasure(
        &self,
        model: &GatModel,
        target: NodeId,
        erased: Option<Edge>,
    ) -> Vec<f64> {
        let mut support = self.support.clone();
        if let Some(e) = erased {
            if let (Some(i), Some(j)) = (self.local[e.src], self.local[e.dst]) {
                let span = support.span(j);
                if let Ok(pos) = support.sources[span.clone()].binary_search(&i) {
                    support.sources.remove(span.start + pos);
                    for o in &mut support.offsets[j + 1..] {
                        *o -= 1;
                    }
                }
            }
        }
        let caches = run_layers(model, &support, self.features.clone());
        let logits = &caches.last().expect("non-empty").output;
        softmax(logits.row(self.local[target].expect("target is in its own field")))
    }
}

/// Class probabilities of `target` after erasing `erased`, computed on the
/// target's receptive field only. Agrees bit for bit with
/// [`forward_with_erasure`] at `target`.
pub fn erased_probs_at(
    model: &GatModel,
    graph: &Graph,
    target: NodeId,
    erased: Edge,
) -> Result<Vec<f64>> {
    check_inputs(model, graph)?;
    check_erasable(graph, erased)?;
    let field = ReceptiveField::new(graph, target, model.num_layers())?;
    Ok(field.probs_with_erasure(model, target, Some(erased)))
}
