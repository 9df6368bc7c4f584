use gatt::datasets::{BaShapesConfig, DatasetBundle, GeneratorConfig, InfectionConfig};
use gatt::graph::Edge;
use proptest::prelude::*;

fn small_infection(seed: u64) -> InfectionConfig {
    InfectionConfig {
        n_nodes: 120,
        edge_prob: 0.03,
        n_infected: 8,
        ..InfectionConfig::new(seed)
    }
}

/// Distances by Bellman-Ford style relaxation, and shortest-path counts by
/// dynamic programming over distance layers.
fn oracle(n: usize, arcs: &[Edge], infected: &[usize]) -> (Vec<Option<usize>>, Vec<u64>) {
    let mut dist: Vec<Option<usize>> = vec![None; n];
    for &i in infected {
        dist[i] = Some(0);
    }
    loop {
        let mut changed = false;
        for e in arcs.iter().filter(|e| !e.is_self_loop()) {
            if let Some(d) = dist[e.src] {
                if dist[e.dst].is_none_or(|x| x > d + 1) {
                    dist[e.dst] = Some(d + 1);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut count = vec![0u64; n];
    for &i in infected {
        count[i] = 1;
    }
    let max = dist.iter().flatten().copied().max().unwrap_or(0);
    for d in 1..=max {
        for e in arcs.iter().filter(|e| !e.is_self_loop()) {
            if dist[e.src] == Some(d - 1) && dist[e.dst] == Some(d) {
                count[e.dst] += count[e.src];
            }
        }
    }
    (dist, count)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn infection_labels_match_oracle(seed in any::<u64>()) {
        let cfg = small_infection(seed);
        let b = cfg.generate().unwrap();
        let g = b.graph();
        let infected: Vec<usize> = serde_json::from_value(g.meta()["infected"].clone()).unwrap();
        prop_assert_eq!(infected.len(), cfg.n_infected);
        let (dist, count) = oracle(g.num_nodes(), g.edges(), &infected);
        let labels = g.labels().unwrap();
        for v in 0..g.num_nodes() {
            let expect = dist[v].map_or(cfg.max_dist, |d| d.min(cfg.max_dist));
            prop_assert_eq!(labels[v], expect);
            let d = dist[v].unwrap_or(usize::MAX);
            let has_path = (1..cfg.max_dist).contains(&d);
            prop_assert_eq!(b.ground_truth_paths().contains_key(&v), has_path);
            if has_path {
                let path = &b.ground_truth_paths()[&v];
                prop_assert_eq!(path.len(), d);
                prop_assert!(infected.contains(&path[0].src));
                prop_assert_eq!(path[d - 1].dst, v);
                for w in path.windows(2) {
                    prop_assert_eq!(w[0].dst, w[1].src);
                }
                for e in path {
                    prop_assert!(g.has_edge(*e));
                }
                prop_assert_eq!(b.ambiguous().contains(&v), count[v] > 1);
            }
        }
    }
}

#[test]
fn explanation_targets_exclude_ambiguous_nodes() {
    let b = small_infection(5).generate().unwrap();
    let targets = b.explanation_targets();
    for v in targets.keys() {
        assert!(!b.ambiguous().contains(v));
    }
    assert_eq!(targets.len() + b.ambiguous().len(), b.ground_truth_paths().len());
}

#[test]
fn bundles_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = [
        small_infection(3).generate().unwrap(),
        BaShapesConfig { n_base: 40, n_motifs: 6, ..BaShapesConfig::new(3) }.generate().unwrap(),
    ];
    for (k, b) in bundles.iter().enumerate() {
        let path = dir.path().join(format!("{k}.json"));
        b.save(&path).unwrap();
        let back = DatasetBundle::load(&path).unwrap();
        assert_eq!(&back, b);
        assert_eq!(back.to_json(), b.to_json());
    }
}

#[test]
fn regeneration_is_byte_identical() {
    let a = InfectionConfig::new(11).generate().unwrap().to_json();
    let b = InfectionConfig::new(11).generate().unwrap().to_json();
    assert_eq!(a, b);
    let c = InfectionConfig::new(12).generate().unwrap().to_json();
    assert_ne!(a, c);
    let a = BaShapesConfig::new(11).generate().unwrap().to_json();
    assert_eq!(a, BaShapesConfig::new(11).generate().unwrap().to_json());
}

#[test]
fn generator_config_is_echoed() {
    let b = BaShapesConfig::new(4).generate().unwrap();
    let v: serde_json::Value = serde_json::from_str(&b.to_json()).unwrap();
    let cfg = &v["meta"]["generator_config"];
    assert_eq!(cfg["dataset"], "ba-shapes");
    assert_eq!(cfg["seed"], 4);
    // the resolved noise edge count is recorded, not the default marker
    assert_eq!(cfg["n_random_edges"], 70);
    let parsed: GeneratorConfig = serde_json::from_value(cfg.clone()).unwrap();
    assert_eq!(parsed.generate().unwrap(), b);
}

#[test]
fn split_partitions_nodes() {
    let b = InfectionConfig::new(2).generate().unwrap();
    let s = b.split();
    let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..1000).collect::<Vec<_>>());
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (800, 100, 100));
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(InfectionConfig { n_infected: 0, ..InfectionConfig::new(0) }.generate().is_err());
    assert!(InfectionConfig { edge_prob: 1.5, ..InfectionConfig::new(0) }.generate().is_err());
    assert!(BaShapesConfig { n_base: 3, ..BaShapesConfig::new(0) }.generate().is_err());
    let bad = r#"{"num_nodes":2,"features":[[1.0],[1.0]],"edges":[],"meta":{"split":{}}}"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, bad).unwrap();
    assert!(DatasetBundle::load(&path).is_err());
}
