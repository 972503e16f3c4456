//! Hill climbing and tabu search over DAGs.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BicScorer, Dataset, SearchConfig, SCORE_TOLERANCE};
use crate::graph::Dag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Op {
    Add,
    Delete,
    Reverse,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    op: Op,
    from: usize,
    to: usize,
    delta: f64,
}

fn apply(dag: &mut Dag, m: &Move) {
    match m.op {
        Op::Add => dag.add_edge(m.from, m.to),
        Op::Delete => dag.remove_edge(m.from, m.to),
        Op::Reverse => {
            dag.remove_edge(m.from, m.to);
            dag.add_edge(m.to, m.from);
        }
    }
}

/// All legal single-edge moves in (operator, from, to) order with their
/// score change.
fn legal_moves(dag: &Dag, scorer: &BicScorer, max_parents: usize) -> Vec<Move> {
    let p = dag.len();
    let mut out = Vec::new();
    let bit = |i: usize| 1u32 << i;
    for op in [Op::Add, Op::Delete, Op::Reverse] {
        for from in 0..p {
            for to in 0..p {
                if from == to {
                    continue;
                }
                let pa_to = dag.parents(to);
                let pa_from = dag.parents(from);
                let delta = match op {
                    Op::Add => {
                        if dag.has_edge(from, to)
                            || dag.has_edge(to, from)
                            || pa_to.count_ones() as usize >= max_parents
                            || dag.has_path(to, from)
                        {
                            continue;
                        }
                        scorer.local(to, pa_to | bit(from)) - scorer.local(to, pa_to)
                    }
                    Op::Delete => {
                        if !dag.has_edge(from, to) {
                            continue;
                        }
                        scorer.local(to, pa_to & !bit(from)) - scorer.local(to, pa_to)
                    }
                    Op::Reverse => {
                        if !dag.has_edge(from, to) || pa_from.count_ones() as usize >= max_parents {
                            continue;
                        }
                        let mut probe = dag.clone();
                        probe.remove_edge(from, to);
                        if probe.has_path(from, to) {
                            continue;
                        }
                        scorer.local(to, pa_to & !bit(from)) - scorer.local(to, pa_to)
                            + scorer.local(from, pa_from | bit(to))
                            - scorer.local(from, pa_from)
                    }
                };
                if delta.is_nan() {
                    continue;
                }
                out.push(Move { op, from, to, delta });
            }
        }
    }
    out
}

/// The first move (in generation order) whose delta is within tolerance of
/// the maximum.
fn pick_best(moves: impl IntoIterator<Item = Move>) -> Option<Move> {
    let moves: Vec<Move> = moves.into_iter().collect();
    let max = moves.iter().map(|m| m.delta).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    moves.into_iter().find(|m| m.delta >= max - SCORE_TOLERANCE)
}

fn climb(mut dag: Dag, scorer: &BicScorer, max_parents: usize) -> Dag {
    while let Some(m) = pick_best(legal_moves(&dag, scorer, max_parents)) {
        if m.delta <= SCORE_TOLERANCE {
            break;
        }
        apply(&mut dag, &m);
    }
    dag
}

fn perturb(dag: &Dag, scorer: &BicScorer, max_parents: usize, rng: &mut ChaCha8Rng) -> Dag {
    let mut out = dag.clone();
    for _ in 0..dag.len().max(1) {
        let moves = legal_moves(&out, scorer, max_parents);
        if moves.is_empty() {
            break;
        }
        let m = moves[rng.random_range(0..moves.len())];
        apply(&mut out, &m);
    }
    out
}

fn with_restarts(start: Dag, scorer: &BicScorer, config: &SearchConfig) -> Dag {
    let mut best = climb(start, scorer, config.max_parents);
    let mut best_score = scorer.score(&best);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.random_restarts {
        let candidate = climb(perturb(&best, scorer, config.max_parents, &mut rng), scorer, config.max_parents);
        let s = scorer.score(&candidate);
        if s > best_score + SCORE_TOLERANCE {
            best = candidate;
            best_score = s;
        }
    }
    best
}

/// Greedy best-improvement search from the empty graph.
pub fn hill_climb(data: &Dataset, config: &SearchConfig) -> Dag {
    hill_climb_from(data, config, Dag::empty(data.names().to_vec()))
}

/// Greedy best-improvement search from `start`, followed by
/// `config.random_restarts` perturb-and-climb rounds.
pub fn hill_climb_from(data: &Dataset, config: &SearchConfig, start: Dag) -> Dag {
    let scorer = BicScorer::new(data);
    with_restarts(start, &scorer, config)
}

pub fn tabu_search(data: &Dataset, config: &SearchConfig) -> Dag {
    tabu_search_from(data, config, Dag::empty(data.names().to_vec()))
}

/// Hill climbing, then repeated best moves that avoid the last
/// `tabu_length` visited structures even when they lower the score. Stops
/// after `tabu_max_stalls` consecutive moves without a new best and
/// returns the best structure seen.
pub fn tabu_search_from(data: &Dataset, config: &SearchConfig, start: Dag) -> Dag {
    let scorer = BicScorer::new(data);
    let mut current = with_restarts(start, &scorer, config);
    let mut best = current.clone();
    let mut best_score = scorer.score(&best);
    let mut tabu: VecDeque<Vec<u32>> = VecDeque::new();
    tabu.push_back(current.parent_masks().to_vec());
    let mut stalls = 0;
    while stalls < config.tabu_max_stalls {
        let moves = legal_moves(&current, &scorer, config.max_parents);
        let allowed = moves.into_iter().filter(|m| {
            let mut next = current.clone();
            apply(&mut next, m);
            !tabu.iter().any(|t| t.as_slice() == next.parent_masks())
        });
        let Some(m) = pick_best(allowed) else {
            break;
        };
        apply(&mut current, &m);
        tabu.push_back(current.parent_masks().to_vec());
        while tabu.len() > config.tabu_length.max(1) {
            tabu.pop_front();
        }
        let s = scorer.score(&current);
        if s > best_score + SCORE_TOLERANCE {
            best = current.clone();
            best_score = s;
            stalls = 0;
        } else {
            stalls += 1;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{bic_score, enumerate_best_dag};
    use rand_distr::{Distribution, StandardNormal};

    fn z(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn named(cols: Vec<Vec<f64>>) -> Dataset {
        let names = ["X", "Y", "Z", "W", "V"][..cols.len()].iter().map(|s| s.to_string()).collect();
        Dataset::new(names, cols).unwrap()
    }

    fn collider(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
        let zc: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i] + zc[i] + 0.5 * z(&mut rng)).collect();
        named(vec![x, y, zc])
    }

    #[test]
    fn collider_recovered_when_first_edge_enters_collider() {
        // X–Y is the stronger pair here, so the first edge is X→Y
        let d = collider(5000, 1);
        let cfg = SearchConfig::default();
        let hc = hill_climb(&d, &cfg);
        assert_eq!(hc.edges(), vec![(0, 1), (2, 1)]);
        assert_eq!(tabu_search(&d, &cfg).edges(), hc.edges());
        assert_eq!(enumerate_best_dag(&d).unwrap().best.edges(), hc.edges());
    }

    #[test]
    fn hill_climb_stops_on_equivalence_plateau_and_tabu_escapes() {
        // Y→Z first leads to a complete DAG whose covered reversal scores 0
        let d = collider(5000, 11);
        let cfg = SearchConfig::default();
        let scorer = BicScorer::new(&d);
        let hc = hill_climb(&d, &cfg);
        assert!(legal_moves(&hc, &scorer, cfg.max_parents).iter().all(|m| m.delta <= SCORE_TOLERANCE));
        assert_eq!(tabu_search(&d, &cfg).edges(), vec![(0, 1), (2, 1)]);
    }

    #[test]
    fn independent_columns_give_empty_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cols = (0..3).map(|_| (0..1000).map(|_| z(&mut rng)).collect()).collect();
        let d = named(cols);
        assert_eq!(hill_climb(&d, &SearchConfig::default()).edge_count(), 0);
    }

    #[test]
    fn chain_pair_reaches_oracle_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x: Vec<f64> = (0..800).map(|_| z(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.8 * v + z(&mut rng)).collect();
        let d = named(vec![x, y]);
        let hc = hill_climb(&d, &SearchConfig::default());
        assert_eq!(hc.edge_count(), 1);
        let oracle = enumerate_best_dag(&d).unwrap();
        assert!((bic_score(&d, &hc) - oracle.best_score).abs() < 1e-9);
    }

    fn adversarial_case() -> (Dataset, Dag) {
        // X→Y←Z, Y→W; start from the reversed, fully shielded orientation
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 2000;
        let x: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
        let zc: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i] + zc[i] + 0.7 * z(&mut rng)).collect();
        let w: Vec<f64> = (0..n).map(|i| 0.9 * y[i] + 0.8 * z(&mut rng)).collect();
        let d = named(vec![x, y, zc, w]);
        let start = Dag::from_edges(d.names().to_vec(), &[(3, 1), (1, 0), (1, 2), (3, 0), (3, 2)]).unwrap();
        (d, start)
    }

    #[test]
    fn tabu_escapes_local_optimum() {
        let (d, start) = adversarial_case();
        let cfg = SearchConfig::default();
        let oracle = enumerate_best_dag(&d).unwrap();
        let hc = hill_climb_from(&d, &cfg, start.clone());
        let tabu = tabu_search_from(&d, &cfg, start);
        assert!(bic_score(&d, &hc) < oracle.best_score - 1.0, "start is not a trap");
        assert!((bic_score(&d, &tabu) - oracle.best_score).abs() < 1e-6);
    }

    #[test]
    fn tabu_never_worse_than_hill_climb() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let n = 300;
            let a: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
            let b: Vec<f64> = a.iter().map(|v| 0.6 * v + z(&mut rng)).collect();
            let c: Vec<f64> = (0..n).map(|i| 0.5 * a[i] - 0.4 * b[i] + z(&mut rng)).collect();
            let e: Vec<f64> = c.iter().map(|v| 0.7 * v + z(&mut rng)).collect();
            let d = named(vec![a, b, c, e]);
            let cfg = SearchConfig { seed, ..Default::default() };
            assert!(bic_score(&d, &tabu_search(&d, &cfg)) >= bic_score(&d, &hill_climb(&d, &cfg)) - 1e-9);
        }
    }

    #[test]
    fn restarts_are_seeded() {
        let (d, start) = adversarial_case();
        let cfg = SearchConfig {
            random_restarts: 4,
            seed: 9,
            ..Default::default()
        };
        let a = hill_climb_from(&d, &cfg, start.clone());
        let b = hill_climb_from(&d, &cfg, start);
        assert_eq!(a, b);
    }

    #[test]
    fn max_parents_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 1000;
        let parents: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| z(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| parents.iter().map(|c| c[i]).sum::<f64>() + 0.3 * z(&mut rng)).collect();
        let mut cols = parents;
        cols.push(y);
        let d = named(cols);
        let cfg = SearchConfig { max_parents: 1, ..Default::default() };
        let g = hill_climb(&d, &cfg);
        assert!((0..4).all(|j| g.parents(j).count_ones() <= 1));
    }
}
