//! Attribution by explicit enumeration of flows in the computation tree.
//!
//! The computation tree of target `v` has `v` at depth 0; the children of a
//! node `j` at depth `d < L` are its message sources (self included) at depth
//! `d + 1`, and the edge between depth `d + 1` and depth `d` is processed by
//! layer `L - d`. A flow is the chain of tree edges from one occurrence of an
//! edge up to the root. Enumeration costs grow exponentially with `L`; these
//! functions are the reference definition, used to check [`super::Attributor`].

use crate::engine::AttentionStack;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeId};

/// A chain of edges from a queried edge up to the target. `edges[0]` is the
/// queried edge and the last edge ends at `target`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Flow {
    edges: Vec<Edge>,
    target: NodeId,
}

impl Flow {
    /// Validates that the edges chain and end at `target`.
    pub fn new(edges: Vec<Edge>, target: NodeId) -> Result<Self> {
        let last = edges
            .last()
            .ok_or_else(|| Error::Validation("a flow has at least one edge".into()))?;
        if last.dst != target {
            return Err(Error::Validation(format!(
                "flow ends at {} instead of target {target}",
                last.dst
            )));
        }
        if let Some(w) = edges.windows(2).find(|w| w[0].dst != w[1].src) {
            return Err(Error::Validation(format!(
                "flow edges {} and {} do not chain",
                w[0], w[1]
            )));
        }
        Ok(Flow { edges, target })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// The queried edge.
    pub fn first(&self) -> Edge {
        self.edges[0]
    }
}

/// Attention weights read along a flow of length `m` in an `L`-layer stack:
/// position `k` (1-based) is read from layer `L - m + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionFlowValues {
    values: Vec<f64>,
}

impl AttentionFlowValues {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Weight of the queried edge.
    pub fn first(&self) -> f64 {
        self.values[0]
    }

    /// Product of the weights after the queried edge; 1 for a single-edge flow.
    pub fn adjustment(&self) -> f64 {
        self.values[1..].iter().product()
    }
}

pub fn attention_flow(stack: &AttentionStack, flow: &Flow) -> Result<AttentionFlowValues> {
    let layers = stack.num_layers();
    let m = flow.len();
    if m > layers {
        return Err(Error::Dimension(format!(
            "flow of length {m} is longer than the {layers}-layer stack"
        )));
    }
    if let Some(e) = flow.edges().iter().find(|e| e.src.max(e.dst) >= stack.num_nodes()) {
        return Err(Error::Dimension(format!(
            "flow edge {e} outside the {}-node stack",
            stack.num_nodes()
        )));
    }
    let values = flow
        .edges()
        .iter()
        .enumerate()
        .map(|(k, &e)| stack.weight(layers - m + k + 1, e))
        .collect();
    Ok(AttentionFlowValues { values })
}

/// Every flow of length `1..=depth` that starts with `edge` and ends at
/// `target`, shortest first. Each occurrence of `edge` in the computation tree
/// yields its own flow.
pub fn enumerate_flows(graph: &Graph, target: NodeId, edge: Edge, depth: usize) -> Vec<Flow> {
    let mut out = Vec::new();
    if target >= graph.num_nodes() || edge.src.max(edge.dst) >= graph.num_nodes() {
        return out;
    }
    let mut path = Vec::with_capacity(depth);
    descend(graph, target, edge, depth, &mut path, &mut out);
    out.sort_by_key(Flow::len);
    out
}

// `path` runs from the root downward; `node` is the current tree node.
fn descend(
    graph: &Graph,
    node: NodeId,
    edge: Edge,
    depth: usize,
    path: &mut Vec<Edge>,
    out: &mut Vec<Flow>,
) {
    if path.len() == depth {
        return;
    }
    for src in graph.message_sources(node) {
        let e = Edge::new(src, node);
        path.push(e);
        if e == edge {
            let edges: Vec<Edge> = path.iter().rev().copied().collect();
            let target = path[0].dst;
            out.push(Flow { edges, target });
        }
        descend(graph, src, edge, depth, path, out);
        path.pop();
    }
}

fn check(stack: &AttentionStack, graph: &Graph, target: NodeId) -> Result<()> {
    stack.check_against(graph)?;
    graph.check_node(target)
}

/// GAtt by definition: the sum over flows of the queried edge's weight times
/// the flow's adjustment.
pub fn gatt_reference(stack: &AttentionStack, graph: &Graph, target: NodeId, edge: Edge) -> Result<f64> {
    check(stack, graph, target)?;
    let mut total = 0.0;
    for flow in enumerate_flows(graph, target, edge, stack.num_layers()) {
        let a = attention_flow(stack, &flow)?;
        total += a.adjustment() * a.first();
    }
    Ok(total)
}

/// Ablation without the adjustment: the sum over flows of the queried edge's
/// weight.
pub fn gatt_sim(stack: &AttentionStack, graph: &Graph, target: NodeId, edge: Edge) -> Result<f64> {
    check(stack, graph, target)?;
    let mut total = 0.0;
    for flow in enumerate_flows(graph, target, edge, stack.num_layers()) {
        total += attention_flow(stack, &flow)?.first();
    }
    Ok(total)
}

/// Ablation that averages instead of sums: GAtt divided by the number of
/// flows (all lengths together); 0 when there are none.
pub fn gatt_avg(stack: &AttentionStack, graph: &Graph, target: NodeId, edge: Edge) -> Result<f64> {
    check(stack, graph, target)?;
    let flows = enumerate_flows(graph, target, edge, stack.num_layers());
    if flows.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for flow in &flows {
        let a = attention_flow(stack, flow)?;
        total += a.adjustment() * a.first();
    }
    Ok(total / flows.len() as f64)
}
