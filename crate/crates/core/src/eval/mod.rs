//! Faithfulness and explanation-accuracy experiments.
//!
//! Faithfulness erases one in-scope edge at a time from the attention softmax
//! and asks how well each method's score predicts the change at the target.
//! All `(target, edge)` pairs are pooled before computing correlations.
//! Accuracy treats attribution scores as a classifier of ground-truth edges.

mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{
    auroc, average_ranks, delta_ne, delta_p, delta_pc, entropy, kendall, pearson, spearman, Metric,
};

use crate::attribution::{AttributionTable, Attributor, Method};
use crate::datasets::{DatasetBundle, GeneratorConfig};
use crate::engine::{forward, GatModel, ReceptiveField};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, NodeId};

/// Effect of erasing one edge on one target's prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErasureOutcome {
    pub target: NodeId,
    pub edge: Edge,
    pub delta_pc: f64,
    pub delta_ne: f64,
    pub prediction_changed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: Metric,
    pub kendall: Metric,
    pub spearman: Metric,
}

impl Correlations {
    pub fn compute(x: &[f64], y: &[f64]) -> Result<Self> {
        Ok(Correlations {
            pearson: pearson(x, y)?,
            kendall: kendall(x, y)?,
            spearman: spearman(x, y)?,
        })
    }

    fn all(&self) -> [Metric; 3] {
        [self.pearson, self.kendall, self.spearman]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_pc: Option<Correlations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_ne: Option<Correlations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_p_auroc: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_auroc: Option<Metric>,
}

impl MethodReport {
    /// The seven faithfulness numbers: three correlations with each of the
    /// two probability changes, and the AUROC for prediction flips.
    pub fn faithfulness_measures(&self) -> Vec<Metric> {
        let mut out = Vec::with_capacity(7);
        for c in [self.delta_pc, self.delta_ne].into_iter().flatten() {
            out.extend(c.all());
        }
        out.extend(self.delta_p_auroc);
        out
    }

    /// Mean of the defined faithfulness measures, if any are defined.
    pub fn faithfulness_mean(&self) -> Option<f64> {
        let vals: Vec<f64> = self.faithfulness_measures().into_iter().filter_map(Metric::value).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Faithfulness,
    Accuracy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub mode: Mode,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    pub n_targets: usize,
    pub targets: Vec<NodeId>,
    /// How per-pair values are combined across targets.
    pub pooling: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy_targets: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    /// Erasures that would empty a softmax (the destination's only in-edge).
    pub degenerate_erasures: usize,
    /// Accuracy targets with no ground-truth edge in scope.
    pub targets_without_positives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ReportConfig,
    pub methods: BTreeMap<String, MethodReport>,
    pub skipped: Skipped,
    /// Number of pooled `(target, edge)` pairs per method.
    pub pairs: usize,
}

impl Report {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.get(method.name())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Plain-text table, one row per method in canonical order.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let rows = Method::ALL.iter().filter_map(|&m| self.method(m).map(|r| (m, r)));
        match self.config.mode {
            Mode::Faithfulness => {
                let _ = writeln!(
                    out,
                    "{:<8} | {:>10} {:>10} {:>10} | {:>10} {:>10} {:>10} | {:>10}",
                    "", "PC pear", "PC kend", "PC spear", "NE pear", "NE kend", "NE spear", "P auroc"
                );
                for (m, r) in rows {
                    let cell = |c: Option<Correlations>| {
                        c.map(|c| c.all().map(|x| format!("{:>10}", x.to_string())).join(" "))
                            .unwrap_or_default()
                    };
                    let p = r.delta_p_auroc.map(|x| x.to_string()).unwrap_or_default();
                    let _ = writeln!(out, "{:<8} | {} | {} | {:>10}", m, cell(r.delta_pc), cell(r.delta_ne), p);
                }
            }
            Mode::Accuracy => {
                let _ = writeln!(out, "{:<8} | {:>10}", "", "AUROC");
                for (m, r) in rows {
                    let a = r.accuracy_auroc.map(|x| x.to_string()).unwrap_or_default();
                    let _ = writeln!(out, "{m:<8} | {a:>10}");
                }
            }
        }
        let _ = writeln!(
            out,
            "pairs: {}, skipped erasures: {}, targets without positives: {}",
            self.pairs, self.skipped.degenerate_erasures, self.skipped.targets_without_positives
        );
        out
    }
}

/// A finished faithfulness sweep: the report plus everything it was computed
/// from.
#[derive(Clone, Debug)]
pub struct Faithfulness {
    pub report: Report,
    pub outcomes: Vec<ErasureOutcome>,
    pub table: AttributionTable,
}

impl Faithfulness {
    /// One row per `(target, edge, method)`:
    /// `target,src,dst,method,score,delta_pc,delta_ne,changed`.
    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "target,src,dst,method,score,delta_pc,delta_ne,changed")?;
        for o in &self.outcomes {
            for m in self.table.methods() {
                if let Some(score) = self.table.get(o.target, o.edge, m) {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        o.target, o.edge.src, o.edge.dst, m, score, o.delta_pc, o.delta_ne, o.prediction_changed
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn save_raw_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_raw_csv(&mut buf).expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// `n` distinct seeded-random nodes (all nodes if `n >= num_nodes`), ascending.
pub fn sample_targets(num_nodes: usize, n: usize, seed: u64) -> Vec<NodeId> {
    let mut rng = crate::datasets::component_rng(seed, 3);
    let mut t = sample(&mut rng, num_nodes, n.min(num_nodes)).into_vec();
    t.sort_unstable();
    t
}

/// Faithfulness on `n_targets` random targets of the bundle's graph.
pub fn run_faithfulness(
    model: &GatModel,
    bundle: &DatasetBundle,
    methods: &[Method],
    n_targets: usize,
    seed: u64,
) -> Result<Faithfulness> {
    let graph = bundle.graph().add_self_loops();
    let targets = sample_targets(graph.num_nodes(), n_targets, seed);
    let mut out = faithfulness_on(model, &graph, &targets, methods, seed)?;
    out.report.config.n_targets = n_targets;
    Ok(out)
}

/// Faithfulness on explicit targets of a self-looped graph.
pub fn faithfulness_on(
    model: &GatModel,
    graph: &Graph,
    targets: &[NodeId],
    methods: &[Method],
    seed: u64,
) -> Result<Faithfulness> {
    if methods.is_empty() {
        return Err(Error::Validation("no attribution methods requested".into()));
    }
    let (pred, stack) = forward(model, graph)?;
    let attributor = Attributor::new(&stack, graph)?;
    let depth = model.num_layers();

    struct TargetResult {
        outcomes: Vec<ErasureOutcome>,
        scores: Vec<(Edge, Method, f64)>,
        skipped: usize,
    }
    let per_target: Vec<TargetResult> = targets
        .par_iter()
        .map(|&v| -> Result<TargetResult> {
            graph.check_node(v)?;
            let p = pred.probs(v);
            let field = ReceptiveField::new(graph, v, depth)?;
            let mut res = TargetResult {
                outcomes: Vec::new(),
                scores: Vec::new(),
                skipped: 0,
            };
            let mut per_method = Vec::with_capacity(methods.len());
            for &m in methods {
                per_method.push((m, attributor.scores(m, v, seed)?));
            }
            let scope: Vec<Edge> = per_method[0].1.keys().copied().collect();
            for e in scope {
                if graph.in_degree(e.dst) <= 1 {
                    res.skipped += 1;
                    continue;
                }
                let q = field.probs_with_erasure(model, v, Some(e));
                res.outcomes.push(ErasureOutcome {
                    target: v,
                    edge: e,
                    delta_pc: delta_pc(p, &q)?,
                    delta_ne: delta_ne(p, &q)?,
                    prediction_changed: delta_p(p, &q)?,
                });
                for (m, s) in &per_method {
                    res.scores.push((e, *m, s[&e]));
                }
            }
            Ok(res)
        })
        .collect::<Result<_>>()?;

    let mut outcomes = Vec::new();
    let mut table = AttributionTable::new();
    let mut skipped = Skipped::default();
    for (r, &v) in per_target.into_iter().zip(targets) {
        outcomes.extend(r.outcomes);
        skipped.degenerate_erasures += r.skipped;
        for (e, m, s) in r.scores {
            table.insert(v, e, m, s)?;
        }
    }

    // canonical pair order so pooled sums don't depend on how targets were listed
    outcomes.sort_by_key(|o| (o.target, o.edge));
    let pcs: Vec<f64> = outcomes.iter().map(|o| o.delta_pc).collect();
    let nes: Vec<f64> = outcomes.iter().map(|o| o.delta_ne).collect();
    let flips: Vec<bool> = outcomes.iter().map(|o| o.prediction_changed).collect();
    let mut reports = BTreeMap::new();
    for &m in methods {
        let scores: Vec<f64> = outcomes
            .iter()
            .map(|o| table.get(o.target, o.edge, m).expect("scored with outcome"))
            .collect();
        reports.insert(
            m.name().to_string(),
            MethodReport {
                delta_pc: Some(Correlations::compute(&scores, &pcs)?),
                delta_ne: Some(Correlations::compute(&scores, &nes)?),
                delta_p_auroc: Some(auroc(&scores, &flips)?),
                accuracy_auroc: None,
            },
        );
    }
    let mut sorted_targets = targets.to_vec();
    sorted_targets.sort_unstable();
    let report = Report {
        config: ReportConfig {
            mode: Mode::Faithfulness,
            seed,
            model: None,
            data: None,
            n_targets: targets.len(),
            targets: sorted_targets,
            pooling: "pooled over (target, edge) pairs".into(),
            accuracy_targets: None,
        },
        methods: reports,
        skipped,
        pairs: outcomes.len(),
    };
    Ok(Faithfulness {
        report,
        outcomes,
        table,
    })
}

/// Per-method AUROC of ground-truth edge membership.
#[derive(Clone, Debug, PartialEq)]
pub struct Accuracy {
    pub auroc: BTreeMap<Method, Metric>,
    /// Targets that contributed pairs, ascending.
    pub targets: Vec<NodeId>,
    pub pairs: usize,
    pub targets_without_positives: usize,
}

/// Scores the table's edges as a classifier of ground-truth membership,
/// pooling every eligible target. Self-loops are never positives.
pub fn run_accuracy(table: &AttributionTable, bundle: &DatasetBundle) -> Result<Accuracy> {
    if bundle.graph().ground_truth().is_none() {
        return Err(Error::Validation("dataset has no ground-truth explanations".into()));
    }
    let eligible = bundle.explanation_targets();
    let methods = table.methods();
    let mut labels = Vec::new();
    let mut scores: BTreeMap<Method, Vec<f64>> = methods.iter().map(|&m| (m, Vec::new())).collect();
    let mut used = Vec::new();
    let mut without = 0;
    for v in table.targets() {
        let Some(gt) = eligible.get(&v) else { continue };
        let edges: BTreeSet<Edge> = methods.iter().flat_map(|&m| table.scores_for(v, m).into_keys()).collect();
        if !edges.iter().any(|e| gt.contains(e)) {
            without += 1;
            continue;
        }
        used.push(v);
        for e in &edges {
            labels.push(!e.is_self_loop() && gt.contains(e));
            for &m in &methods {
                let s = table.get(v, *e, m).ok_or_else(|| {
                    Error::Validation(format!("table has no {m} score for {e} at target {v}"))
                })?;
                scores.get_mut(&m).expect("method listed").push(s);
            }
        }
    }
    let mut out = BTreeMap::new();
    for (m, s) in &scores {
        out.insert(*m, auroc(s, &labels)?);
    }
    Ok(Accuracy {
        auroc: out,
        targets: used,
        pairs: labels.len(),
        targets_without_positives: without,
    })
}

/// Attributes every explanation target of the bundle and measures accuracy.
pub fn accuracy_experiment(
    model: &GatModel,
    bundle: &DatasetBundle,
    methods: &[Method],
    seed: u64,
) -> Result<(Report, AttributionTable)> {
    if methods.is_empty() {
        return Err(Error::Validation("no attribution methods requested".into()));
    }
    if bundle.graph().ground_truth().is_none() {
        return Err(Error::Validation("dataset has no ground-truth explanations".into()));
    }
    let graph = bundle.graph().add_self_loops();
    let (_, stack) = forward(model, &graph)?;
    let attributor = Attributor::new(&stack, &graph)?;
    let targets: Vec<NodeId> = bundle.explanation_targets().into_keys().collect();
    let table = AttributionTable::compute(&attributor, &targets, methods, seed)?;
    let acc = run_accuracy(&table, bundle)?;
    let accuracy_targets = match bundle.config() {
        GeneratorConfig::BaShapes(_) => "motif nodes, scored against all motif edges",
        GeneratorConfig::Infection(_) => "infected-distance targets with a unique shortest path",
    };
    let report = Report {
        config: ReportConfig {
            mode: Mode::Accuracy,
            seed,
            model: None,
            data: None,
            n_targets: acc.targets.len(),
            targets: acc.targets.clone(),
            pooling: "pooled over (target, edge) pairs".into(),
            accuracy_targets: Some(accuracy_targets.into()),
        },
        methods: acc
            .auroc
            .iter()
            .map(|(m, a)| {
                (
                    m.name().to_string(),
                    MethodReport {
                        accuracy_auroc: Some(*a),
                        ..MethodReport::default()
                    },
                )
            })
            .collect(),
        skipped: Skipped {
            degenerate_erasures: 0,
            targets_without_positives: acc.targets_without_positives,
        },
        pairs: acc.pairs,
    };
    Ok((report, table))
}
