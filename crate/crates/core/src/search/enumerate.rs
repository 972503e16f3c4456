//! Exhaustive search over all DAGs on a handful of nodes.

use super::{BicScorer, Dataset};
use crate::error::{Error, Result};
use crate::graph::{cpdag_of, Cpdag, Dag};

pub const MAX_ENUMERATION_NODES: usize = 5;

/// Absolute tolerance for score ties in the exhaustive argmax.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub best: Dag,
    pub best_score: f64,
    pub best_cpdag: Cpdag,
    pub dags_scored: usize,
}

/// Parent masks of every DAG on `p` nodes. Each unordered pair is absent,
/// forward or backward; cyclic assignments are skipped.
pub fn enumerate_dags(p: usize) -> Result<Vec<Vec<u32>>> {
    if p > MAX_ENUMERATION_NODES {
        return Err(Error::Config(format!(
            "exhaustive enumeration supports at most {MAX_ENUMERATION_NODES} nodes, got {p}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut parents = vec![0u32; p];
        for &(a, b) in &pairs {
            match code % 3 {
                1 => parents[b] |= 1 << a,
                2 => parents[a] |= 1 << b,
                _ => {}
            }
            code /= 3;
        }
        if acyclic(&parents) {
            out.push(parents);
        }
    }
    Ok(out)
}

fn acyclic(parents: &[u32]) -> bool {
    let mut removed = 0u32;
    for _ in 0..parents.len() {
        let Some(sink) = (0..parents.len()).find(|&j| removed & (1 << j) == 0 && parents[j] & !removed == 0) else {
            return false;
        };
        removed |= 1 << sink;
    }
    true
}

/// Scores every DAG and returns the maximizer. Ties within 1e-9 go to the
/// lexicographically smallest sorted edge list.
pub fn enumerate_best_dag(data: &Dataset) -> Result<Enumeration> {
    let all = enumerate_dags(data.p())?;
    let scorer = BicScorer::new(data);
    let names = data.names().to_vec();
    let mut best: Option<(f64, Dag)> = None;
    for parents in &all {
        let dag = Dag::from_parents(names.clone(), parents.clone());
        let s = scorer.score(&dag);
        let replace = match &best {
            None => true,
            Some((bs, bd)) => s > bs + TIE_TOLERANCE || ((s - bs).abs() <= TIE_TOLERANCE && dag.edges() < bd.edges()),
        };
        if replace {
            best = Some((s, dag));
        }
    }
    let (best_score, best) = best.expect("at least the empty graph");
    let best_cpdag = cpdag_of(&best);
    Ok(Enumeration {
        best,
        best_score,
        best_cpdag,
        dags_scored: all.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_dag_counts() {
        let counts: Vec<usize> = (1..=5).map(|p| enumerate_dags(p).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 3, 25, 543, 29281]);
    }

    #[test]
    fn too_many_nodes_rejected() {
        assert!(enumerate_dags(6).is_err());
    }
}
