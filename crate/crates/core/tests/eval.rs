mod common;

use gatt::attribution::Method;
use gatt::datasets::InfectionConfig;
use gatt::eval::{
    accuracy_experiment, auroc, delta_ne, entropy, faithfulness_on, kendall, pearson,
    run_faithfulness, spearman, Metric,
};
use gatt::trainer::init_model;
use proptest::prelude::*;
use rand::Rng;

use common::{auroc_oracle, kendall_oracle, pearson_oracle, rng, spearman_oracle};

fn close(m: Metric, oracle: Option<f64>) -> bool {
    match (m, oracle) {
        (Metric::Value(a), Some(b)) => (a - b).abs() <= 1e-12,
        (Metric::Degenerate, None) => true,
        _ => false,
    }
}

// Values from a small alphabet so ties are frequent.
fn tied_list(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(0..6) as f64 * 0.5).collect()
}

#[test]
fn metrics_match_brute_force() {
    let mut r = rng(99);
    for case in 0..100 {
        let n = r.random_range(2..=30);
        let (x, y) = if case % 2 == 0 {
            (tied_list(&mut r, n), tied_list(&mut r, n))
        } else {
            let x: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            (x, y)
        };
        let labels: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
        assert!(close(pearson(&x, &y).unwrap(), pearson_oracle(&x, &y)), "pearson case {case}");
        assert!(close(spearman(&x, &y).unwrap(), spearman_oracle(&x, &y)), "spearman case {case}");
        assert!(close(kendall(&x, &y).unwrap(), kendall_oracle(&x, &y)), "kendall case {case}");
        assert!(close(auroc(&x, &labels).unwrap(), auroc_oracle(&x, &labels)), "auroc case {case}");
    }
}

#[test]
fn entropy_difference_matches_direct_evaluation() {
    let h = |p: &[f64]| -> f64 { p.iter().map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 }).sum() };
    let d = delta_ne(&[0.9, 0.1], &[0.6, 0.4]).unwrap();
    assert!((d - (h(&[0.6, 0.4]) - h(&[0.9, 0.1]))).abs() < 1e-15);
    assert_eq!(entropy(&[1.0, 0.0, 0.0]), 0.0);
}

fn simplex(r: &mut impl Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 1e-3).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

proptest! {
    #[test]
    fn delta_ne_is_antisymmetric(seed in any::<u64>(), k in 1usize..6) {
        let mut r = rng(seed);
        let (p, q) = (simplex(&mut r, k), simplex(&mut r, k));
        prop_assert_eq!(delta_ne(&p, &p).unwrap(), 0.0);
        prop_assert_eq!(delta_ne(&p, &q).unwrap(), -delta_ne(&q, &p).unwrap());
    }

    #[test]
    fn auroc_of_negated_scores_is_complement(seed in any::<u64>(), n in 2usize..40) {
        let mut r = rng(seed);
        let s: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
        labels[0] = true;
        labels[1] = false;
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        let a = auroc(&s, &labels).unwrap().value().unwrap();
        let b = auroc(&neg, &labels).unwrap().value().unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_metrics_ignore_monotone_transforms(seed in any::<u64>(), n in 2usize..40) {
        let mut r = rng(seed);
        let x = tied_list(&mut r, n);
        let y = tied_list(&mut r, n);
        let fx: Vec<f64> = x.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(spearman(&x, &y).unwrap(), spearman(&fx, &y).unwrap());
        prop_assert_eq!(kendall(&x, &y).unwrap(), kendall(&fx, &y).unwrap());
    }

    #[test]
    fn correlations_stay_in_range(seed in any::<u64>(), n in 2usize..40) {
        let mut r = rng(seed);
        let x = tied_list(&mut r, n);
        let y = tied_list(&mut r, n);
        for m in [pearson(&x, &y), spearman(&x, &y), kendall(&x, &y)] {
            if let Metric::Value(v) = m.unwrap() {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}

fn small_infection() -> gatt::datasets::DatasetBundle {
    InfectionConfig {
        n_nodes: 200,
        edge_prob: 0.02,
        n_infected: 15,
        ..InfectionConfig::new(13)
    }
    .generate()
    .unwrap()
}

#[test]
fn report_ignores_target_order_and_threads() {
    let b = small_infection();
    let g = b.graph().add_self_loops();
    let m = init_model(3, &[2, 4, 4, 5], &[1, 1, 1], 2.0).unwrap();
    let targets: Vec<usize> = (0..40).collect();
    let mut reversed = targets.clone();
    reversed.reverse();
    let a = faithfulness_on(&m, &g, &targets, &Method::ALL, 3).unwrap();
    let b2 = faithfulness_on(&m, &g, &reversed, &Method::ALL, 3).unwrap();
    assert_eq!(a.report.methods, b2.report.methods);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| faithfulness_on(&m, &g, &targets, &Method::ALL, 3).unwrap());
    assert_eq!(a.report.to_json(), single.report.to_json());
}

#[test]
fn random_baseline_is_null() {
    let b = small_infection();
    let m = init_model(3, &[2, 4, 4, 5], &[1, 1, 1], 2.0).unwrap();
    let f = run_faithfulness(&m, &b, &[Method::Random], 200, 8).unwrap();
    assert!(f.report.pairs >= 2000, "only {} pairs", f.report.pairs);
    let r = f.report.method(Method::Random).unwrap();
    for c in [r.delta_pc.unwrap(), r.delta_ne.unwrap()] {
        for v in [c.pearson, c.kendall, c.spearman] {
            assert!(v.value().unwrap().abs() < 0.1, "{v}");
        }
    }
    let (acc, _) = accuracy_experiment(&m, &b, &[Method::Random], 8).unwrap();
    let a = acc.method(Method::Random).unwrap().accuracy_auroc.unwrap().value().unwrap();
    assert!((0.45..=0.55).contains(&a), "{a}");
}

#[test]
fn raw_csv_has_one_row_per_pair_and_method() {
    let b = small_infection();
    let m = init_model(1, &[2, 4, 5], &[1, 1], 2.0).unwrap();
    let f = run_faithfulness(&m, &b, &[Method::GAtt, Method::AvgAtt], 5, 2).unwrap();
    let mut buf = Vec::new();
    f.write_raw_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "target,src,dst,method,score,delta_pc,delta_ne,changed");
    assert_eq!(lines.count(), 2 * f.outcomes.len());
}

#[test]
fn report_json_shape() {
    let b = small_infection();
    let m = init_model(1, &[2, 4, 5], &[1, 1], 2.0).unwrap();
    let f = run_faithfulness(&m, &b, &[Method::GAtt], 5, 2).unwrap();
    let v: serde_json::Value = serde_json::from_str(&f.report.to_json()).unwrap();
    let gatt = &v["methods"]["GAtt"];
    for measure in ["delta_pc", "delta_ne"] {
        for stat in ["pearson", "kendall", "spearman"] {
            assert!(gatt[measure][stat].is_number() || gatt[measure][stat] == "degenerate");
        }
    }
    assert!(gatt["delta_p_auroc"].is_number() || gatt["delta_p_auroc"] == "degenerate");
    assert_eq!(v["config"]["n_targets"], 5);
    assert!(v["skipped"]["degenerate_erasures"].is_number());
}
