//! Greedy equivalence search with Insert and Delete operators.

use super::{bits, BicScorer, Dataset, SearchConfig, SCORE_TOLERANCE};
use crate::graph::{consistent_extension, cpdag_of, Cpdag};

fn is_clique(g: &Cpdag, set: u32) -> bool {
    let v: Vec<usize> = bits(set).collect();
    v.iter()
        .enumerate()
        .all(|(i, &a)| v[i + 1..].iter().all(|&b| g.adjacent(a, b)))
}

/// Whether every semi-directed path from `from` to `to` passes through
/// `blocked`.
fn paths_blocked(g: &Cpdag, from: usize, to: usize, blocked: u32) -> bool {
    let mut seen = 1u32 << from;
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        for v in 0..g.len() {
            if seen & (1 << v) != 0 || !(g.has_directed(u, v) || g.has_undirected(u, v)) {
                continue;
            }
            if v == to {
                return false;
            }
            seen |= 1 << v;
            if blocked & (1 << v) == 0 {
                stack.push(v);
            }
        }
    }
    true
}

/// Subsets of `mask` in increasing numeric order.
fn subsets(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(0u32);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask { None } else { Some((cur.wrapping_sub(mask)) & mask) };
        Some(cur)
    })
}

#[derive(Clone, Copy)]
struct Step {
    x: usize,
    y: usize,
    set: u32,
    delta: f64,
}

fn better(best: &Option<Step>, delta: f64) -> bool {
    best.as_ref().is_none_or(|b| delta > b.delta + SCORE_TOLERANCE)
}

fn best_insert(g: &Cpdag, scorer: &BicScorer, max_parents: usize) -> Option<Step> {
    let p = g.len();
    let mut best = None;
    for x in 0..p {
        for y in 0..p {
            if x == y || g.adjacent(x, y) {
                continue;
            }
            let na = g.neighbours(y) & g.adjacents(x);
            let t0 = g.neighbours(y) & !g.adjacents(x) & !(1 << x);
            for t in subsets(t0) {
                let cond = g.parents(y) | na | t;
                if cond.count_ones() as usize + 1 > max_parents {
                    continue;
                }
                if !is_clique(g, na | t) || !paths_blocked(g, y, x, na | t) {
                    continue;
                }
                let delta = scorer.local(y, cond | (1 << x)) - scorer.local(y, cond);
                if !delta.is_nan() && better(&best, delta) {
                    best = Some(Step { x, y, set: t, delta });
                }
            }
        }
    }
    best
}

fn best_delete(g: &Cpdag, scorer: &BicScorer) -> Option<Step> {
    let p = g.len();
    let mut best = None;
    for x in 0..p {
        for y in 0..p {
            if x == y || !(g.has_directed(x, y) || g.has_undirected(x, y)) {
                continue;
            }
            let na = g.neighbours(y) & g.adjacents(x);
            for h in subsets(na) {
                let rest = na & !h;
                if !is_clique(g, rest) {
                    continue;
                }
                let cond = (g.parents(y) | rest) & !(1 << x);
                let delta = scorer.local(y, cond) - scorer.local(y, cond | (1 << x));
                if !delta.is_nan() && better(&best, delta) {
                    best = Some(Step { x, y, set: h, delta });
                }
            }
        }
    }
    best
}

/// Re-completes a partially directed graph to the CPDAG of its class.
fn recomplete(g: &Cpdag) -> Cpdag {
    match consistent_extension(g) {
        Ok(dag) => cpdag_of(&dag),
        Err(_) => g.clone(),
    }
}

/// Forward phase of Insert operators, then backward phase of Delete
/// operators, each step taking the best valid operator and re-completing
/// the equivalence class.
pub fn fges(data: &Dataset, config: &SearchConfig) -> Cpdag {
    let scorer = BicScorer::new(data);
    let mut g = Cpdag::empty(data.names().to_vec());
    while let Some(s) = best_insert(&g, &scorer, config.max_parents) {
        if s.delta <= SCORE_TOLERANCE {
            break;
        }
        g.add_directed(s.x, s.y);
        for t in bits(s.set) {
            g.add_directed(t, s.y);
        }
        g = recomplete(&g);
    }
    while let Some(s) = best_delete(&g, &scorer) {
        if s.delta <= SCORE_TOLERANCE {
            break;
        }
        g.remove_edge(s.x, s.y);
        for h in bits(s.set) {
            if g.has_undirected(s.y, h) {
                g.add_directed(s.y, h);
            }
            if g.has_undirected(s.x, h) {
                g.add_directed(s.x, h);
            }
        }
        g = recomplete(&g);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{bic_score, enumerate_best_dag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn z(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn named(cols: Vec<Vec<f64>>) -> Dataset {
        let names = ["X", "Y", "Z", "W"][..cols.len()].iter().map(|s| s.to_string()).collect();
        Dataset::new(names, cols).unwrap()
    }

    #[test]
    fn subsets_enumerates_all() {
        let all: Vec<u32> = subsets(0b1010).collect();
        assert_eq!(all, vec![0b0000, 0b0010, 0b1000, 0b1010]);
        assert_eq!(subsets(0).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn chain_is_undirected() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 5000;
        let x: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.8 * v + z(&mut rng)).collect();
        let zc: Vec<f64> = y.iter().map(|v| 0.8 * v + z(&mut rng)).collect();
        let g = fges(&named(vec![x, y, zc]), &SearchConfig::default());
        assert!(g.directed_edges().is_empty());
        assert_eq!(g.undirected_edges(), vec![(0, 1), (1, 2)]);
        assert!(g.is_meek_fixpoint());
    }

    #[test]
    fn collider_is_directed() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 5000;
        let x: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
        let zc: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|i| x[i] + zc[i] + 0.5 * z(&mut rng)).collect();
        let d = named(vec![x, y, zc]);
        let g = fges(&d, &SearchConfig::default());
        assert_eq!(g.directed_edges(), vec![(0, 1), (2, 1)]);
        assert!(g.undirected_edges().is_empty());
        assert_eq!(g, enumerate_best_dag(&d).unwrap().best_cpdag);
    }

    #[test]
    fn independent_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cols = (0..4).map(|_| (0..1000).map(|_| z(&mut rng)).collect()).collect();
        let g = fges(&named(cols), &SearchConfig::default());
        assert!(g.skeleton().is_empty());
    }

    #[test]
    fn four_node_class_reaches_oracle() {
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let n = 2000;
            let a: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
            let b: Vec<f64> = (0..n).map(|_| z(&mut rng)).collect();
            let c: Vec<f64> = (0..n).map(|i| 0.7 * a[i] + 0.6 * b[i] + z(&mut rng)).collect();
            let w: Vec<f64> = c.iter().map(|v| 0.8 * v + z(&mut rng)).collect();
            let d = named(vec![a, b, c, w]);
            let g = fges(&d, &SearchConfig::default());
            let oracle = enumerate_best_dag(&d).unwrap();
            let ext = consistent_extension(&g).unwrap();
            assert!((bic_score(&d, &ext) - oracle.best_score).abs() < 1e-6);
            assert_eq!(g, oracle.best_cpdag);
        }
    }
}
