use cardiocausal::graph::{cpdag_of, Dag, MixedGraph};
use cardiocausal::search::{bic_score, fges, hill_climb, tabu_search, Dataset, SearchConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn z(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A random DAG over `p` nodes consistent with the identity order, and
/// linear-Gaussian data drawn from it.
fn random_sem(p: usize, n: usize, rng: &mut ChaCha8Rng) -> (Dag, Dataset) {
    let names: Vec<String> = (0..p).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    let mut weights = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in a + 1..p {
            if rng.random_bool(0.5) {
                edges.push((a, b));
                let w: f64 = rng.random_range(0.4..1.0);
                weights[a][b] = if rng.random_bool(0.5) { w } else { -w };
            }
        }
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
    for _ in 0..n {
        let mut row = vec![0.0; p];
        for b in 0..p {
            row[b] = (0..b).map(|a| weights[a][b] * row[a]).sum::<f64>() + z(rng);
        }
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    (Dag::from_edges(names.clone(), &edges).unwrap(), Dataset::new(names, cols).unwrap())
}

fn covered_edges(dag: &Dag) -> Vec<(usize, usize)> {
    dag.edges()
        .into_iter()
        .filter(|&(a, b)| dag.parents(b) & !(1 << a) == dag.parents(a))
        .collect()
}

#[test]
fn equivalent_dags_score_equally() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..100 {
        let p = 3 + trial % 3;
        let (mut dag, data) = random_sem(p, 300, &mut rng);
        let class = cpdag_of(&dag);
        let base = bic_score(&data, &dag);
        for _ in 0..4 {
            let cov = covered_edges(&dag);
            if cov.is_empty() {
                break;
            }
            let (a, b) = cov[rng.random_range(0..cov.len())];
            dag.remove_edge(a, b);
            dag.add_edge(b, a);
            assert!(dag.is_acyclic());
            assert_eq!(cpdag_of(&dag), class);
            assert!((bic_score(&data, &dag) - base).abs() < 1e-6);
        }
    }
}

#[test]
fn outputs_are_valid_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = SearchConfig::default();
    for _ in 0..20 {
        let (_, data) = random_sem(5, 400, &mut rng);
        assert!(hill_climb(&data, &cfg).is_acyclic());
        assert!(tabu_search(&data, &cfg).is_acyclic());
        assert!(fges(&data, &cfg).is_meek_fixpoint());
    }
}

#[test]
fn identical_inputs_serialize_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (_, data) = random_sem(5, 500, &mut rng);
    let cfg = SearchConfig {
        seed: 17,
        random_restarts: 3,
        ..Default::default()
    };
    let json = |g: MixedGraph| serde_json::to_string(&g).unwrap();
    assert_eq!(json((&hill_climb(&data, &cfg)).into()), json((&hill_climb(&data, &cfg)).into()));
    assert_eq!(json((&tabu_search(&data, &cfg)).into()), json((&tabu_search(&data, &cfg)).into()));
    assert_eq!(json((&fges(&data, &cfg)).into()), json((&fges(&data, &cfg)).into()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn structure_invariant_to_affine_rescaling(
        seed in any::<u64>(),
        scales in proptest::collection::vec((0.01f64..100.0, -50.0f64..50.0), 4),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, data) = random_sem(4, 400, &mut rng);
        let names = data.names().to_vec();
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|j| data.column(j).iter().map(|v| scales[j].0 * v + scales[j].1).collect())
            .collect();
        let scaled = Dataset::new(names, cols).unwrap();
        let cfg = SearchConfig::default();
        prop_assert_eq!(hill_climb(&data, &cfg), hill_climb(&scaled, &cfg));
        prop_assert_eq!(tabu_search(&data, &cfg), tabu_search(&scaled, &cfg));
        prop_assert_eq!(fges(&data, &cfg), fges(&scaled, &cfg));
    }
}
