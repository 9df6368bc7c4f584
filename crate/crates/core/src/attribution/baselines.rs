use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::AttentionStack;
use crate::error::{Error, Result};
use crate::graph::Edge;

/// Mean attention weight of `edge` over every layer and head, independent of
/// any target. Layers or heads without the edge contribute 0.
/// Errors if no layer stores the edge at all.
pub fn avg_att(stack: &AttentionStack, edge: Edge) -> Result<f64> {
    let present = stack
        .layers()
        .iter()
        .flat_map(|l| l.heads())
        .any(|h| h.contains(edge.dst, edge.src));
    if !present {
        return Err(Error::EdgeNotInSupport(edge));
    }
    Ok(mean_weight(stack, edge))
}

pub(crate) fn mean_weight(stack: &AttentionStack, edge: Edge) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for head in stack.layers().iter().flat_map(|l| l.heads()) {
        total += head.get(edge.dst, edge.src);
        count += 1;
    }
    total / count as f64
}

/// Independent uniform scores in `[0, 1)`, one per edge in order.
pub fn random_attribution(seed: u64, edges: &[Edge]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.iter().map(|_| rng.random::<f64>()).collect()
}

/// Seed of the `index`-th independent stream under `master`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
