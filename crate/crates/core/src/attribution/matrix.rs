use std::collections::BTreeMap;

use crate::attribution::baselines::{mean_weight, random_attribution, stream_seed};
use crate::attribution::Method;
use crate::engine::AttentionStack;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeId};
use crate::sparse::SparseMatrix;

/// `C_L(k) = A(L) A(L-1) ... A(L-k+1)` for `k` in `0..=L`, with
/// `C_L(0) = I`. Row `v` of `C_L(k)` weights every node by the total
/// attention product of its `k`-step paths into `v`.
pub fn cumulative_attention(stack: &AttentionStack, k: usize) -> Result<SparseMatrix> {
    let layers = stack.num_layers();
    if k > layers {
        return Err(Error::OutOfRange(format!(
            "cumulative attention depth {k} for a {layers}-layer stack"
        )));
    }
    let mut c = SparseMatrix::identity(stack.num_nodes());
    for step in 0..k {
        c = c.matmul(stack.matrix(layers - step))?;
    }
    Ok(c)
}

/// Precomputed products for scoring many targets against one attention stack.
///
/// Construction multiplies out `C_L(k)` for `k < L` (and the matching walk
/// count matrices for the ablations); after that each edge score is a sum of
/// `L` products of stored entries.
#[derive(Debug)]
pub struct Attributor<'a> {
    stack: &'a AttentionStack,
    graph: &'a Graph,
    // cumulative[k] = C_L(k)
    cumulative: Vec<SparseMatrix>,
    // walks[k] = T^k, T the 0/1 message-passing adjacency (row = destination)
    walks: Vec<SparseMatrix>,
}

impl<'a> Attributor<'a> {
    pub fn new(stack: &'a AttentionStack, graph: &'a Graph) -> Result<Self> {
        stack.check_against(graph)?;
        let layers = stack.num_layers();
        let n = graph.num_nodes();
        let mut cumulative = Vec::with_capacity(layers);
        cumulative.push(SparseMatrix::identity(n));
        for k in 1..layers {
            let next = cumulative[k - 1].matmul(stack.matrix(layers - k + 1))?;
            cumulative.push(next);
        }
        let adjacency = SparseMatrix::from_triplets(
            n,
            (0..n).flat_map(|j| graph.message_sources(j).map(move |i| (j, i, 1.0))),
        )?;
        let mut walks = Vec::with_capacity(layers);
        walks.push(SparseMatrix::identity(n));
        for k in 1..layers {
            let next = walks[k - 1].matmul(&adjacency)?;
            walks.push(next);
        }
        Ok(Attributor {
            stack,
            graph,
            cumulative,
            walks,
        })
    }

    pub fn stack(&self) -> &AttentionStack {
        self.stack
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn num_layers(&self) -> usize {
        self.stack.num_layers()
    }

    /// `C_L(k)` for `k < L`.
    pub fn cumulative(&self, k: usize) -> &SparseMatrix {
        &self.cumulative[k]
    }

    /// Edges that can influence `target`, each with score 0.
    fn scope(&self, target: NodeId) -> Result<BTreeMap<Edge, f64>> {
        Ok(self
            .graph
            .k_hop_edge_set(target, self.num_layers())?
            .into_iter()
            .map(|e| (e, 0.0))
            .collect())
    }

    // sum_m weights[L-m][v, j] * A(m)[j, i], accumulated into `scores`
    fn accumulate(&self, weights: &[SparseMatrix], target: NodeId, scores: &mut BTreeMap<Edge, f64>) {
        let layers = self.num_layers();
        for m in 1..=layers {
            let attention = self.stack.matrix(m);
            let (nodes, ws) = weights[layers - m].row(target);
            for (&j, &w) in nodes.iter().zip(ws) {
                let (srcs, alphas) = attention.row(j);
                for (&i, &a) in srcs.iter().zip(alphas) {
                    *scores
                        .get_mut(&Edge::new(i, j))
                        .expect("weighted destinations lie within the scope") += w * a;
                }
            }
        }
    }

    /// GAtt scores of every edge in the `L`-hop scope of `target`.
    pub fn gatt(&self, target: NodeId) -> Result<BTreeMap<Edge, f64>> {
        let mut scores = self.scope(target)?;
        self.accumulate(&self.cumulative, target, &mut scores);
        Ok(scores)
    }

    /// Flow-count weighted sum of first-edge attention (no adjustment).
    pub fn gatt_sim(&self, target: NodeId) -> Result<BTreeMap<Edge, f64>> {
        let mut scores = self.scope(target)?;
        self.accumulate(&self.walks, target, &mut scores);
        Ok(scores)
    }

    /// Number of flows from each in-scope edge to `target`.
    pub fn flow_counts(&self, target: NodeId) -> Result<BTreeMap<Edge, f64>> {
        let layers = self.num_layers();
        let mut counts = self.scope(target)?;
        for (edge, count) in counts.iter_mut() {
            for walks in &self.walks[..layers] {
                *count += walks.get(target, edge.dst);
            }
        }
        Ok(counts)
    }

    /// GAtt divided by the flow count.
    pub fn gatt_avg(&self, target: NodeId) -> Result<BTreeMap<Edge, f64>> {
        let mut scores = self.gatt(target)?;
        let counts = self.flow_counts(target)?;
        for (edge, score) in scores.iter_mut() {
            let c = counts[edge];
            *score = if c > 0.0 { *score / c } else { 0.0 };
        }
        Ok(scores)
    }

    /// Scores of every in-scope edge of `target` under `method`. The random
    /// baseline draws from a stream derived from `seed` and `target`.
    pub fn scores(&self, method: Method, target: NodeId, seed: u64) -> Result<BTreeMap<Edge, f64>> {
        match method {
            Method::GAtt => self.gatt(target),
            Method::GAttSim => self.gatt_sim(target),
            Method::GAttAvg => self.gatt_avg(target),
            Method::AvgAtt => {
                let mut scores = self.scope(target)?;
                for (edge, score) in scores.iter_mut() {
                    *score = mean_weight(self.stack, *edge);
                }
                Ok(scores)
            }
            Method::Random => {
                let scope = self.scope(target)?;
                let edges: Vec<Edge> = scope.keys().copied().collect();
                let values = random_attribution(stream_seed(seed, target as u64), &edges);
                Ok(edges.into_iter().zip(values).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_stack() -> (Graph, AttentionStack) {
        let g = Graph::builder(41).edges([(40, 27)]).build().unwrap().add_self_loops();
        let a1 = SparseMatrix::from_triplets(41, [(27, 40, 0.9)]).unwrap();
        let a2 = SparseMatrix::from_triplets(41, [(27, 40, 0.25), (27, 27, 0.25)]).unwrap();
        (g, AttentionStack::from_layers(vec![a1, a2]).unwrap())
    }

    #[test]
    fn cumulative_endpoints() {
        let (_, s) = fig2_stack();
        assert_eq!(cumulative_attention(&s, 0).unwrap(), SparseMatrix::identity(41));
        assert_eq!(&cumulative_attention(&s, 1).unwrap(), s.matrix(2));
        assert!(cumulative_attention(&s, 3).is_err());
    }

    #[test]
    fn worked_example() {
        let (g, s) = fig2_stack();
        let at = Attributor::new(&s, &g).unwrap();
        let e = Edge::new(40, 27);
        assert!((at.gatt(27).unwrap()[&e] - 0.475).abs() < 1e-12);
        assert!((at.gatt_sim(27).unwrap()[&e] - 1.15).abs() < 1e-12);
        assert!((at.gatt_avg(27).unwrap()[&e] - 0.2375).abs() < 1e-12);
        assert_eq!(at.flow_counts(27).unwrap()[&e], 2.0);
    }

    #[test]
    fn mismatched_stack_is_rejected() {
        let (_, s) = fig2_stack();
        let small = Graph::builder(3).build().unwrap().add_self_loops();
        assert!(Attributor::new(&s, &small).is_err());
        let no_edge = Graph::builder(41).build().unwrap().add_self_loops();
        assert!(Attributor::new(&s, &no_edge).is_err());
    }
}
