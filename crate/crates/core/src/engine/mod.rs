//! Graph attention network inference: parameters, forward passes, attention
//! extraction and counterfactual passes with one edge erased from the
//! attention softmax.
//!
//! Each layer projects node features per head (`z = h W`), scores every
//! message-passing edge `i -> j` with
//! `LeakyReLU(att_src . z_i + att_dst . z_j)`, normalizes the scores with a
//! softmax over the sources of `j` (self-loop included) and aggregates
//! `sum_i alpha_ij z_i`. Heads are concatenated or averaged, then the
//! activation is applied.

mod forward;
mod model;
mod stack;

pub use forward::{
    argmax, erased_probs_at, extract_attention, forward, forward_with_erasure, predict, softmax,
    Prediction,
};
pub(crate) use forward::{check_inputs, run_layers, LayerCache, ReceptiveField, Support};
pub use model::{Activation, GatModel, HeadMerge, HeadParams, LayerParams};
pub use stack::{AttentionStack, LayerAttention};
