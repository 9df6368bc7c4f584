//! Edge attribution from attention weights.
//!
//! [`Attributor`] is the production path: it precomputes products of the
//! head-averaged attention matrices once per stack and scores every edge that
//! can reach a target with `L` multiply-adds. The free functions
//! [`gatt_reference`], [`gatt_sim`] and [`gatt_avg`] evaluate the same
//! quantities by enumerating flows in the computation tree and exist to check
//! the matrix path.

mod baselines;
mod flows;
mod matrix;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

pub use baselines::{avg_att, random_attribution, stream_seed};
pub use flows::{
    attention_flow, enumerate_flows, gatt_avg, gatt_reference, gatt_sim, AttentionFlowValues, Flow,
};
pub use matrix::{cumulative_attention, Attributor};

use crate::error::{Error, Result};
use crate::graph::{Edge, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    GAtt,
    GAttSim,
    GAttAvg,
    AvgAtt,
    Random,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::GAtt,
        Method::GAttSim,
        Method::GAttAvg,
        Method::AvgAtt,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GAtt => "GAtt",
            Method::GAttSim => "GAttSim",
            Method::GAttAvg => "GAttAvg",
            Method::AvgAtt => "AvgAtt",
            Method::Random => "Random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "gatt" => Ok(Method::GAtt),
            "gattsim" => Ok(Method::GAttSim),
            "gattavg" => Ok(Method::GAttAvg),
            "avgatt" => Ok(Method::AvgAtt),
            "random" => Ok(Method::Random),
            _ => Err(Error::Validation(format!(
                "unknown method {s:?} (expected gatt, gatt_sim, gatt_avg, avg_att or random)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttributionRow {
    pub target: NodeId,
    pub edge: Edge,
    pub method: Method,
    pub score: f64,
}

/// Attribution scores keyed by `(target, edge, method)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttributionTable {
    rows: BTreeMap<(NodeId, Edge, Method), f64>,
}

impl AttributionTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scores every in-scope edge of each target under each method.
    pub fn compute(
        attributor: &Attributor<'_>,
        targets: &[NodeId],
        methods: &[Method],
        seed: u64,
    ) -> Result<Self> {
        let mut table = Self::new();
        for &target in targets {
            for &method in methods {
                for (edge, score) in attributor.scores(method, target, seed)? {
                    table.insert(target, edge, method, score)?;
                }
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, target: NodeId, edge: Edge, method: Method, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::NonFinite(format!("{method} score of {edge} for target {target}")));
        }
        self.rows.insert((target, edge, method), score);
        Ok(())
    }

    pub fn get(&self, target: NodeId, edge: Edge, method: Method) -> Option<f64> {
        self.rows.get(&(target, edge, method)).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows ordered by target, then edge, then method.
    pub fn rows(&self) -> impl Iterator<Item = AttributionRow> + '_ {
        self.rows
            .iter()
            .map(|(&(target, edge, method), &score)| AttributionRow {
                target,
                edge,
                method,
                score,
            })
    }

    pub fn targets(&self) -> Vec<NodeId> {
        let mut t: Vec<NodeId> = self.rows.keys().map(|k| k.0).collect();
        t.dedup();
        t
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.rows.keys().map(|k| k.2).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Scores of one method for one target.
    pub fn scores_for(&self, target: NodeId, method: Method) -> BTreeMap<Edge, f64> {
        self.rows
            .range((target, Edge::new(0, 0), Method::GAtt)..)
            .take_while(|(k, _)| k.0 == target)
            .filter(|(k, _)| k.2 == method)
            .map(|(k, &v)| (k.1, v))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "target,src,dst,method,score")?;
        for r in self.rows() {
            writeln!(out, "{},{},{},{},{}", r.target, r.edge.src, r.edge.dst, r.method, r.score)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
