//! Edge attribution for graph attention networks.
//!
//! An `L`-layer attention network propagates messages along a depth-`L`
//! computation tree rooted at each target node, and the same graph edge can
//! appear in that tree many times. GAtt scores an edge for a target by summing,
//! over every occurrence, the edge's attention weight scaled by the attention
//! weights on the path from that occurrence up to the root. The sum collapses
//! to a product of per-layer attention matrices:
//!
//! ```text
//! phi(v; i -> j) = sum_{m=1..L} [A(L) A(L-1) ... A(m+1)]_{v,j} * [A(m)]_{j,i}
//! ```
//!
//! The crate contains everything needed to study that claim end to end:
//!
//! - [`graph`] and [`sparse`]: graphs, neighborhoods and sparse matrices;
//! - [`datasets`]: seeded BA-Shapes and Infection benchmarks with ground truth;
//! - [`engine`]: attention network inference, attention extraction, and
//!   attention erasure;
//! - [`trainer`]: full-batch training with hand-derived gradients;
//! - [`attribution`]: GAtt (matrix and flow-enumeration forms), its two
//!   ablations and the AvgAtt and random baselines;
//! - [`eval`]: faithfulness under attention erasure and accuracy against
//!   ground-truth explanations.
//!
//! ```
//! use gatt::attribution::{gatt_reference, Attributor};
//! use gatt::engine::AttentionStack;
//! use gatt::graph::{Edge, Graph};
//! use gatt::sparse::SparseMatrix;
//!
//! let graph = Graph::builder(41).edges([(40, 27)]).build()?.add_self_loops();
//! let a1 = SparseMatrix::from_triplets(41, [(27, 40, 0.9)])?;
//! let a2 = SparseMatrix::from_triplets(41, [(27, 40, 0.25), (27, 27, 0.25)])?;
//! let stack = AttentionStack::from_layers(vec![a1, a2])?;
//!
//! let scores = Attributor::new(&stack, &graph)?.gatt(27)?;
//! let edge = Edge::new(40, 27);
//! assert!((scores[&edge] - 0.475).abs() < 1e-12);
//! assert!((gatt_reference(&stack, &graph, 27, edge)? - 0.475).abs() < 1e-12);
//! # Ok::<(), gatt::Error>(())
//! ```

pub mod attribution;
pub mod datasets;
pub mod dense;
pub mod engine;
mod error;
pub mod eval;
pub mod graph;
pub mod sparse;
pub mod trainer;

pub use error::{Error, Result};
