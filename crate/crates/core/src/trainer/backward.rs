//! Exact gradients of the node-classification loss.
//!
//! The pass mirrors the forward layer by layer. Inside a head, with
//! `alpha_ij = softmax_i(LeakyReLU(u_ij))` and `u_ij = s_src_i + s_dst_j`:
//!
//! ```text
//! d alpha_ij = dAgg_j . z_i
//! d e_ij     = alpha_ij (d alpha_ij - sum_k alpha_kj d alpha_kj)
//! d u_ij     = d e_ij * (u_ij > 0 ? 1 : slope)
//! d z_i     += alpha_ij dAgg_j + (sum_j d u_ij) att_src + (sum_i d u_ji) att_dst
//! ```

use crate::dense::{dot, Matrix};
use crate::engine::{check_inputs, run_layers, softmax, GatModel, HeadMerge, LayerCache, Support};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Loss value, gradients shaped like the model, and the logits they came from.
pub(crate) struct LossEval {
    pub loss: f64,
    pub grads: GatModel,
    pub logits: Matrix,
}

pub(crate) fn evaluate(model: &GatModel, graph: &Graph, nodes: &[NodeId], l2_weight: f64) -> Result<LossEval> {
    check_inputs(model, graph)?;
    let labels = graph
        .labels()
        .ok_or_else(|| Error::MissingLabels("graph has no labels".into()))?;
    if nodes.is_empty() {
        return Err(Error::MissingLabels("empty node subset".into()));
    }
    let classes = model.num_classes();
    for &v in nodes {
        graph.check_node(v)?;
        if labels[v] >= classes {
            return Err(Error::MissingLabels(format!(
                "node {v} has label {} but the model predicts {classes} classes",
                labels[v]
            )));
        }
    }
    let support = Support::full(graph)?;
    let caches = run_layers(model, &support, Matrix::from_rows(graph.features()));
    let logits = caches.last().expect("non-empty").output.clone();

    let scale = 1.0 / nodes.len() as f64;
    let mut ce = 0.0;
    let mut d_out = Matrix::zeros(logits.rows(), classes);
    for &v in nodes {
        let p = softmax(logits.row(v));
        ce -= p[labels[v]].ln();
        let row = d_out.row_mut(v);
        for (c, (d, pc)) in row.iter_mut().zip(&p).enumerate() {
            *d += scale * (pc - if c == labels[v] { 1.0 } else { 0.0 });
        }
    }
    let flat = model.to_flat();
    let sq: f64 = flat.iter().map(|x| x * x).sum();
    let loss = ce * scale + 0.5 * l2_weight * sq;

    let mut grads = model.clone();
    for (l, cache) in caches.iter().enumerate().rev() {
        d_out = layer_backward(model, l, cache, &support, &d_out, &mut grads);
    }
    let raw = grads.to_flat();
    let total: Vec<f64> = raw.iter().zip(&flat).map(|(g, p)| g + l2_weight * p).collect();
    let grads = model.with_flat(&total)?;
    Ok(LossEval { loss, grads, logits })
}

// Writes layer `l` parameter gradients into `grads` and returns the gradient
// with respect to the layer input.
fn layer_backward(
    model: &GatModel,
    l: usize,
    cache: &LayerCache,
    support: &Support,
    d_output: &Matrix,
    grads: &mut GatModel,
) -> Matrix {
    let layer = &model.layers()[l];
    let n = support.num_nodes();
    let num_heads = layer.heads.len();
    let head_dim = layer.head_dim();
    let act = layer.activation;
    let d_merged = Matrix::from_fn(n, layer.out_dim(), |r, c| {
        d_output[(r, c)] * act.derivative(cache.merged[(r, c)])
    });
    let mut d_input = Matrix::zeros(n, layer.in_dim());
    for (h, params) in layer.heads.iter().enumerate() {
        let hc = &cache.heads[h];
        let (offset, scale) = match layer.head_merge {
            HeadMerge::Concat => (h * head_dim, 1.0),
            HeadMerge::Average => (0, 1.0 / num_heads as f64),
        };
        let d_agg = Matrix::from_fn(n, head_dim, |r, c| d_merged[(r, offset + c)] * scale);

        let mut dz = Matrix::zeros(n, head_dim);
        let mut ds_src = vec![0.0; n];
        let mut ds_dst = vec![0.0; n];
        let mut d_alpha = vec![0.0; support.num_edges()];
        for j in 0..n {
            let span = support.span(j);
            let g = d_agg.row(j);
            let mut weighted = 0.0;
            for k in span.clone() {
                let i = support.sources()[k];
                d_alpha[k] = dot(g, hc.z.row(i));
                weighted += hc.alpha[k] * d_alpha[k];
                let a = hc.alpha[k];
                for (dzi, &gj) in dz.row_mut(i).iter_mut().zip(g) {
                    *dzi += a * gj;
                }
            }
            for k in span {
                let i = support.sources()[k];
                let de = hc.alpha[k] * (d_alpha[k] - weighted);
                let du = if hc.u[k] > 0.0 { de } else { de * layer.leaky_slope };
                ds_src[i] += du;
                ds_dst[j] += du;
            }
        }

        let gh = &mut grads.layers_mut()[l].heads[h];
        gh.att_src.iter_mut().for_each(|x| *x = 0.0);
        gh.att_dst.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let zi = hc.z.row(i);
            for (c, &zc) in zi.iter().enumerate() {
                gh.att_src[c] += ds_src[i] * zc;
                gh.att_dst[c] += ds_dst[i] * zc;
            }
            let row = dz.row_mut(i);
            for c in 0..head_dim {
                row[c] += ds_src[i] * params.att_src[c] + ds_dst[i] * params.att_dst[c];
            }
        }
        gh.weight = cache.input.t_matmul(&dz);
        let back = dz.matmul_t(&params.weight);
        for (d, b) in d_input.as_mut_slice().iter_mut().zip(back.as_slice()) {
            *d += b;
        }
    }
    d_input
}

/// Mean cross-entropy over `nodes` plus `l2_weight * ||params||^2 / 2`, and its
/// exact gradient with the same shape as `model`.
pub fn loss_and_grads(
    model: &GatModel,
    graph: &Graph,
    nodes: &[NodeId],
    l2_weight: f64,
) -> Result<(f64, GatModel)> {
    let eval = evaluate(model, graph, nodes, l2_weight)?;
    Ok((eval.loss, eval.grads))
}

/// Denominator floor for relative errors, so parameters whose true gradient
/// is zero compare by absolute error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Largest relative difference between analytic gradients and central finite
/// differences with step `step`, over every parameter. Relative error is
/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn finite_diff_check(
    model: &GatModel,
    graph: &Graph,
    nodes: &[NodeId],
    l2_weight: f64,
    step: f64,
) -> Result<f64> {
    let (_, grads) = loss_and_grads(model, graph, nodes, l2_weight)?;
    let analytic = grads.to_flat();
    let base = model.to_flat();
    let mut worst: f64 = 0.0;
    let mut probe = base.clone();
    for k in 0..base.len() {
        probe[k] = base[k] + step;
        let up = evaluate(&model.with_flat(&probe)?, graph, nodes, l2_weight)?.loss;
        probe[k] = base[k] - step;
        let down = evaluate(&model.with_flat(&probe)?, graph, nodes, l2_weight)?.loss;
        probe[k] = base[k];
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[k].abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    Ok(worst)
}
