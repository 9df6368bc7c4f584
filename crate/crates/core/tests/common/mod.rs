#![allow(dead_code)]

use gatt::engine::AttentionStack;
use gatt::graph::{Edge, Graph};
use gatt::sparse::SparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Self-looped directed graph with `n` nodes, each off-diagonal arc present
/// with probability `p`, and random `dim`-dimensional features.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, dim: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let features = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Graph::builder(n)
        .edges(edges)
        .features(features)
        .build()
        .unwrap()
        .add_self_loops()
}

/// Row-stochastic attention over every destination's in-edges, independently
/// per layer and head.
pub fn random_stack(rng: &mut ChaCha8Rng, g: &Graph, layers: usize, heads: usize) -> AttentionStack {
    let n = g.num_nodes();
    let per_layer = (0..layers)
        .map(|_| {
            (0..heads)
                .map(|_| {
                    let mut trip = Vec::new();
                    for j in 0..n {
                        let srcs = g.in_sources(j);
                        let w: Vec<f64> = srcs.iter().map(|_| rng.random_range(0.01..1.0)).collect();
                        let total: f64 = w.iter().sum();
                        for (&i, wi) in srcs.iter().zip(&w) {
                            trip.push((j, i, wi / total));
                        }
                    }
                    SparseMatrix::from_triplets(n, trip).unwrap()
                })
                .collect()
        })
        .collect();
    AttentionStack::from_heads(per_layer).unwrap()
}

/// The graph with one arc physically deleted.
pub fn without_edge(g: &Graph, e: Edge) -> Graph {
    Graph::builder(g.num_nodes())
        .edges(g.edges().iter().copied().filter(|&x| x != e))
        .features(g.features().to_vec())
        .build()
        .unwrap()
}

// Oracles written directly from the textbook definitions, sharing no code with
// the library.

pub fn pearson_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

/// Rank = 1 + (number strictly smaller) + (number equal excluding self) / 2.
pub fn rank_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|a| {
            let less = x.iter().filter(|b| *b < a).count() as f64;
            let equal = x.iter().filter(|b| *b == a).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_oracle(&rank_oracle(x), &rank_oracle(y))
}

/// Tau-b by enumerating every pair.
pub fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                tie_x += 1;
                tie_y += 1;
            } else if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - tie_x) * (n0 - tie_y)) as f64).sqrt();
    if denom == 0.0 {
        None
    } else {
        Some((conc - disc) as f64 / denom)
    }
}

/// Fraction of (positive, negative) pairs ordered correctly, ties worth 1/2.
pub fn auroc_oracle(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                count += 1;
                total += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (count > 0).then(|| total / count as f64)
}
