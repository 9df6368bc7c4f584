//! The twelve acceptance criteria, one PASS/FAIL line each.
//!
//! Correctness criteria (1-7, 12) are asserted. The directional criteria
//! (8-11) depend on how a trained model happens to use its attention; they
//! print their measured values and verdict but do not abort the run.

mod common;

use std::io::Write;
use std::time::Instant;

use gatt::attribution::{avg_att, gatt_reference, Attributor, Method};
use gatt::datasets::{BaShapesConfig, DatasetBundle, InfectionConfig};
use gatt::engine::{extract_attention, forward, predict, AttentionStack, GatModel};
use gatt::eval::{accuracy_experiment, auroc, kendall, pearson, run_faithfulness, spearman, Metric};
use gatt::graph::{Edge, Graph};
use gatt::sparse::SparseMatrix;
use gatt::trainer::{finite_diff_check, init_model, train, TrainConfig};
use rand::Rng;

use common::{
    auroc_oracle, kendall_oracle, pearson_oracle, random_graph, random_stack, rng, spearman_oracle,
    without_edge,
};

// Written to the stdout handle directly: libtest captures `println!` of
// passing tests, and these lines should show up in every run.
fn report(line: String) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

fn verdict(n: usize, pass: bool, detail: String) -> bool {
    report(format!("{} criterion {n:>2}: {detail}", if pass { "PASS" } else { "FAIL" }));
    pass
}

fn corpus() -> Vec<(Graph, AttentionStack)> {
    (0..60u64)
        .map(|seed| {
            let mut r = rng(1000 + seed);
            let n = r.random_range(2..=20);
            let layers = 1 + seed as usize % 3;
            let g = random_graph(&mut r, n, 0.2, 1);
            let stack = random_stack(&mut r, &g, layers, 1 + seed as usize % 2);
            (g, stack)
        })
        .collect()
}

fn c1() -> bool {
    let g = Graph::builder(41).edges([(40, 27)]).build().unwrap().add_self_loops();
    let a1 = SparseMatrix::from_triplets(41, [(27, 40, 0.9)]).unwrap();
    let a2 = SparseMatrix::from_triplets(41, [(27, 40, 0.25), (27, 27, 0.25)]).unwrap();
    let stack = AttentionStack::from_layers(vec![a1, a2]).unwrap();
    let e = Edge::new(40, 27);
    let fast = Attributor::new(&stack, &g).unwrap().gatt(27).unwrap()[&e];
    let slow = gatt_reference(&stack, &g, 27, e).unwrap();
    let pass = (fast - 0.475).abs() <= 1e-12 && (slow - 0.475).abs() <= 1e-12;
    verdict(1, pass, format!("worked example gatt = {fast}, reference = {slow}"))
}

fn c2_3_4() -> [bool; 3] {
    let start = Instant::now();
    let (mut eq, mut cons, mut collapse) = (0.0f64, 0.0f64, 0.0f64);
    let corpus = corpus();
    for (g, stack) in &corpus {
        let at = Attributor::new(stack, g).unwrap();
        let layers = stack.num_layers();
        for v in 0..g.num_nodes() {
            let scores = at.gatt(v).unwrap();
            for (&e, &s) in &scores {
                eq = eq.max((s - gatt_reference(stack, g, v, e).unwrap()).abs());
            }
            cons = cons.max((scores.values().sum::<f64>() - layers as f64).abs());
            if layers == 1 {
                let (sim, avg) = (at.gatt_sim(v).unwrap(), at.gatt_avg(v).unwrap());
                for (&e, &s) in &scores {
                    let raw = stack.weight(1, e);
                    for x in [s, sim[&e], avg[&e]] {
                        collapse = collapse.max((x - raw).abs());
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    [
        verdict(2, eq <= 1e-9 && secs < 30.0, format!("{} graphs, max |matrix - enumeration| = {eq:.2e} in {secs:.2}s", corpus.len())),
        verdict(3, cons <= 1e-6, format!("max |sum of scores - L| = {cons:.2e}")),
        verdict(4, collapse <= 1e-12, format!("single-layer max deviation from raw attention = {collapse:.2e}")),
    ]
}

fn c5() -> bool {
    let start = Instant::now();
    let mut r = rng(5);
    let base = random_graph(&mut r, 12, 0.3, 3);
    let labels = (0..12).map(|_| r.random_range(0..3)).collect();
    let g = Graph::builder(12)
        .edges(base.edges().iter().copied())
        .features(base.features().to_vec())
        .labels(labels)
        .build()
        .unwrap();
    let m = init_model(5, &[3, 4, 4, 3], &[2, 2, 1], 1.0).unwrap();
    let nodes: Vec<usize> = (0..12).collect();
    let err = finite_diff_check(&m, &g, &nodes, 5e-4, 1e-5).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(5, err < 1e-4 && secs < 60.0, format!("12 nodes, L=3, H<=2: max relative error {err:.2e} in {secs:.2}s"))
}

fn c6() -> bool {
    let mut r = rng(6);
    let g = random_graph(&mut r, 15, 0.3, 2);
    let m = init_model(6, &[2, 4, 4, 3], &[2, 2, 1], 2.0).unwrap();
    let before = extract_attention(&m, &g).unwrap().max_row_deviation();
    let mut after: f64 = 0.0;
    let mut erased = 0;
    for &e in g.edges().iter().filter(|e| !e.is_self_loop() && g.in_degree(e.dst) > 1) {
        after = after.max(extract_attention(&m, &without_edge(&g, e)).unwrap().max_row_deviation());
        erased += 1;
    }
    verdict(6, before <= 1e-9 && after <= 1e-9, format!("row deviation {before:.2e}, after {erased} erasures {after:.2e}"))
}

fn c7() -> bool {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    let mut check = |m: Metric, o: Option<f64>| match (m, o) {
        (Metric::Value(a), Some(b)) => worst = worst.max((a - b).abs()),
        (Metric::Degenerate, None) => {}
        _ => mismatched += 1,
    };
    for case in 0..100 {
        let n = r.random_range(2..=30);
        let draw = |r: &mut rand_chacha::ChaCha8Rng| -> f64 {
            if case % 2 == 0 { r.random_range(0..5) as f64 } else { r.random::<f64>() }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let l: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
        check(pearson(&x, &y).unwrap(), pearson_oracle(&x, &y));
        check(spearman(&x, &y).unwrap(), spearman_oracle(&x, &y));
        check(kendall(&x, &y).unwrap(), kendall_oracle(&x, &y));
        check(auroc(&x, &l).unwrap(), auroc_oracle(&x, &l));
    }
    verdict(7, worst <= 1e-12 && mismatched == 0, format!("100 instances, max deviation {worst:.2e}, degenerate mismatches {mismatched}"))
}

/// Three-layer single-head GAT with hidden width 16 and default training.
fn trained(bundle: &DatasetBundle, seed: u64) -> (GatModel, f64) {
    let g = bundle.graph();
    let sizes = [g.feature_dim(), 16, 16, g.num_classes().unwrap()];
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    let init = init_model(seed, &sizes, &[1, 1, 1], cfg.init_scale).unwrap();
    let (model, _) = train(&init, bundle, &cfg).unwrap();
    let pred = predict(&model, &g.add_self_loops()).unwrap();
    let labels = g.labels().unwrap();
    let train_nodes = &bundle.split().train;
    let hits = train_nodes.iter().filter(|&&v| pred.argmax(v) == labels[v]).count();
    (model, hits as f64 / train_nodes.len() as f64)
}

fn value(m: Option<Metric>) -> f64 {
    m.and_then(|m| m.value()).unwrap_or(f64::NAN)
}

const ALL: [Method; 5] = Method::ALL;

fn c8(bundle: &DatasetBundle, model: &GatModel, train_acc: f64) -> bool {
    let start = Instant::now();
    let (report, _) = accuracy_experiment(model, bundle, &ALL, 7).unwrap();
    let a = |m: Method| value(report.method(m).unwrap().accuracy_auroc);
    let (g, avg, rnd) = (a(Method::GAtt), a(Method::AvgAtt), a(Method::Random));
    let pass = train_acc >= 0.9 && g >= 0.9 && g > avg + 0.05 && (0.45..=0.55).contains(&rnd);
    verdict(
        8,
        pass,
        format!(
            "Infection train acc {train_acc:.4}; accuracy AUROC GAtt {g:.4}, AvgAtt {avg:.4} (gap {:.4}, need > 0.05), Random {rnd:.4} [{:.1}s]",
            g - avg,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c9() -> bool {
    let bundle = BaShapesConfig::new(1).generate().unwrap();
    let (model, train_acc) = trained(&bundle, 1);
    let (report, _) = accuracy_experiment(&model, &bundle, &[Method::GAtt, Method::AvgAtt], 1).unwrap();
    let a = |m: Method| value(report.method(m).unwrap().accuracy_auroc);
    let (g, avg) = (a(Method::GAtt), a(Method::AvgAtt));
    verdict(9, g > avg, format!("BA-Shapes accuracy AUROC GAtt {g:.4} vs AvgAtt {avg:.4} (train acc {train_acc:.4})"))
}

fn c10_11(bundle: &DatasetBundle, model: &GatModel) -> [bool; 2] {
    let start = Instant::now();
    let run = run_faithfulness(model, bundle, &ALL, 100, 7).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rep = |m: Method| run.report.method(m).unwrap();
    let rho = |m: Method| value(rep(m).delta_pc.map(|c| c.spearman));
    let (g, avg) = (rho(Method::GAtt), rho(Method::AvgAtt));
    let random = rep(Method::Random);
    let random_max = [random.delta_pc.unwrap(), random.delta_ne.unwrap()]
        .iter()
        .flat_map(|c| [c.pearson, c.kendall, c.spearman])
        .map(|m| m.value().unwrap_or(0.0).abs())
        .fold(0.0, f64::max);
    let p10 = g > avg && g > 0.3 && random_max < 0.1;
    let c10 = verdict(
        10,
        p10,
        format!(
            "{} pairs, Spearman(score, dPC) GAtt {g:.4}, AvgAtt {avg:.4}; Random max |rho| {random_max:.4} [{secs:.1}s]",
            run.report.pairs
        ),
    );
    let mean = |m: Method| rep(m).faithfulness_mean().unwrap_or(f64::NAN);
    let (mg, ms, ma, mv) = (mean(Method::GAtt), mean(Method::GAttSim), mean(Method::GAttAvg), mean(Method::AvgAtt));
    let p11 = mg >= ms && mg >= ma && [mg, ms, ma].iter().all(|&x| x > mv);
    let c11 = verdict(
        11,
        p11,
        format!("mean of 7 faithfulness measures: GAtt {mg:.4}, GAttSim {ms:.4}, GAttAvg {ma:.4}, AvgAtt {mv:.4}"),
    );
    [c10, c11]
}

fn c12() -> bool {
    let bundle = InfectionConfig::new(12).generate().unwrap();
    let g = bundle.graph().add_self_loops();
    let model = init_model(12, &[2, 16, 16, 5], &[1, 1, 1], 3f64.sqrt()).unwrap();
    let (_, stack) = forward(&model, &g).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (pre, attr, rows) = pool.install(|| {
        let t0 = Instant::now();
        let at = Attributor::new(&stack, &g).unwrap();
        let pre = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let mut rows = 0;
        for v in gatt::eval::sample_targets(g.num_nodes(), 100, 12) {
            rows += at.gatt(v).unwrap().len();
        }
        (pre, t1.elapsed().as_secs_f64(), rows)
    });
    // the avg_att entry point is also cheap per edge
    let _ = avg_att(&stack, Edge::self_loop(0)).unwrap();
    verdict(12, pre < 2.0 && attr < 5.0, format!("1000 nodes, L=3: precompute {pre:.3}s, 100 targets ({rows} edges) {attr:.3}s single-threaded"))
}

#[test]
fn acceptance() {
    let mut hard = vec![c1()];
    hard.extend(c2_3_4());
    hard.push(c5());
    hard.push(c6());
    hard.push(c7());

    let bundle = InfectionConfig::new(7).generate().unwrap();
    let (model, train_acc) = trained(&bundle, 7);
    let mut directional = vec![c8(&bundle, &model, train_acc), c9()];
    directional.extend(c10_11(&bundle, &model));

    hard.push(c12());
    let failed_dir = directional.iter().filter(|p| !**p).count();
    report(format!("directional criteria failing: {failed_dir} of {}", directional.len()));
    assert!(hard.iter().all(|p| *p), "a correctness criterion failed");
}
