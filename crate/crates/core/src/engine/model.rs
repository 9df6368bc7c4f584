use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadMerge {
    Concat,
    Average,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Elu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
        }
    }
}

/// Parameters of one attention head: `weight` maps `in_dim -> head_dim`
/// features, `att_src`/`att_dst` score the projected source and destination.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub weight: Matrix,
    pub att_src: Vec<f64>,
    pub att_dst: Vec<f64>,
}

impl HeadParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        HeadParams {
            weight: Matrix::zeros(in_dim, out_dim),
            att_src: vec![0.0; out_dim],
            att_dst: vec![0.0; out_dim],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.att_src.len() + self.att_dst.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<HeadParams>,
    pub leaky_slope: f64,
    pub head_merge: HeadMerge,
    pub activation: Activation,
}

impl LayerParams {
    pub fn in_dim(&self) -> usize {
        self.heads[0].weight.rows()
    }

    pub fn head_dim(&self) -> usize {
        self.heads[0].weight.cols()
    }

    /// Feature width after heads are merged.
    pub fn out_dim(&self) -> usize {
        match self.head_merge {
            HeadMerge::Concat => self.head_dim() * self.heads.len(),
            HeadMerge::Average => self.head_dim(),
        }
    }
}

/// A stack of graph attention layers. The last layer averages its heads and
/// has no activation, so its output is the class logits.
#[derive(Clone, Debug, PartialEq)]
pub struct GatModel {
    layers: Vec<LayerParams>,
}

impl GatModel {
    pub fn new(layers: Vec<LayerParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("model has no layers".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            let Some(first) = layer.heads.first() else {
                return Err(Error::Dimension(format!("layer {l} has no heads")));
            };
            let (fin, fout) = (first.weight.rows(), first.weight.cols());
            for (h, head) in layer.heads.iter().enumerate() {
                if head.weight.rows() != fin
                    || head.weight.cols() != fout
                    || head.att_src.len() != fout
                    || head.att_dst.len() != fout
                {
                    return Err(Error::Dimension(format!(
                        "layer {l} head {h}: expected weight {fin}x{fout} and attention vectors of length {fout}"
                    )));
                }
                if !head.weight.is_finite()
                    || head.att_src.iter().chain(&head.att_dst).any(|x| !x.is_finite())
                {
                    return Err(Error::NonFinite(format!("layer {l} head {h} parameters")));
                }
            }
            if !layer.leaky_slope.is_finite() {
                return Err(Error::NonFinite(format!("layer {l} leaky_slope")));
            }
            if l > 0 && layers[l - 1].out_dim() != fin {
                return Err(Error::Dimension(format!(
                    "layer {} outputs {} features but layer {l} expects {fin}",
                    l - 1,
                    layers[l - 1].out_dim()
                )));
            }
        }
        let last = layers.last().expect("non-empty");
        if last.head_merge != HeadMerge::Average || last.activation != Activation::Identity {
            return Err(Error::Validation(
                "final layer must average heads and use the identity activation".into(),
            ));
        }
        Ok(GatModel { layers })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.heads)
            .map(HeadParams::num_params)
            .sum()
    }

    /// All parameters in a fixed order: per layer, per head, the weight
    /// (row-major), then `att_src`, then `att_dst`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for head in self.layers.iter().flat_map(|l| &l.heads) {
            out.extend_from_slice(head.weight.as_slice());
            out.extend_from_slice(&head.att_src);
            out.extend_from_slice(&head.att_dst);
        }
        out
    }

    /// Same architecture with parameters read from `flat` (layout of [`to_flat`](Self::to_flat)).
    pub fn with_flat(&self, flat: &[f64]) -> Result<GatModel> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut model = self.clone();
        let mut pos = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[pos..pos + dst.len()]);
            pos += dst.len();
        };
        for head in model.layers.iter_mut().flat_map(|l| &mut l.heads) {
            take(head.weight.as_mut_slice());
            take(&mut head.att_src);
            take(&mut head.att_dst);
        }
        GatModel::new(model.layers)
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    heads: l.heads.len(),
                    leaky_slope: l.leaky_slope,
                    head_merge: l.head_merge,
                    activation: l.activation,
                    per_head: l
                        .heads
                        .iter()
                        .map(|h| HeadFile {
                            weight: h.weight.to_rows(),
                            att_src: h.att_src.clone(),
                            att_dst: h.att_dst.clone(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<GatModel> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ModelFile = serde_path_to_error::deserialize(de)
            .map_err(|err| Error::Schema(format!("at `{}`: {}", err.path(), err.inner())))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (l, lf) in file.layers.into_iter().enumerate() {
            if lf.per_head.len() != lf.heads {
                return Err(Error::Schema(format!(
                    "at `layers[{l}].per_head`: {} entries but heads = {}",
                    lf.per_head.len(),
                    lf.heads
                )));
            }
            let mut heads = Vec::with_capacity(lf.heads);
            for (h, hf) in lf.per_head.into_iter().enumerate() {
                let cols = hf.weight.first().map_or(0, Vec::len);
                if hf.weight.iter().any(|r| r.len() != cols) {
                    return Err(Error::Schema(format!(
                        "at `layers[{l}].per_head[{h}].weight`: ragged rows"
                    )));
                }
                heads.push(HeadParams {
                    weight: Matrix::from_rows(&hf.weight),
                    att_src: hf.att_src,
                    att_dst: hf.att_dst,
                });
            }
            layers.push(LayerParams {
                heads,
                leaky_slope: lf.leaky_slope,
                head_merge: lf.head_merge,
                activation: lf.activation,
            });
        }
        GatModel::new(layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GatModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GatModel::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    heads: usize,
    leaky_slope: f64,
    head_merge: HeadMerge,
    activation: Activation,
    per_head: Vec<HeadFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeadFile {
    weight: Vec<Vec<f64>>,
    att_src: Vec<f64>,
    att_dst: Vec<f64>,
}
