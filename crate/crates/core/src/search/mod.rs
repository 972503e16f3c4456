//! Score-based causal structure search over a data matrix.
//!
//! Every method is deterministic: ties in the score are broken by the
//! lexicographic order of (operator, from-node, to-node), and any random
//! choice draws from a generator seeded by [`SearchConfig::seed`].

mod bic;
mod cam;
mod enumerate;
mod gc;
mod ges;
mod greedy;
mod spline;

pub use bic::{bic_score, BicScorer};
pub use cam::{cam_learn, cam_learn_with_pvalues, CamOutcome};
pub use enumerate::{enumerate_best_dag, enumerate_dags, Enumeration, MAX_ENUMERATION_NODES};
pub use gc::{gc_graph, gc_graph_data};
pub use ges::fges;
pub use greedy::{hill_climb, hill_climb_from, tabu_search, tabu_search_from};

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::record_io::{ParameterName, ParameterTable, Position};

/// Score differences within this absolute tolerance count as ties.
pub const SCORE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreKind {
    GaussianBic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub score: ScoreKind,
    pub max_parents: usize,
    pub tabu_length: usize,
    pub tabu_max_stalls: usize,
    pub random_restarts: usize,
    pub cam_prune_alpha: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            score: ScoreKind::GaussianBic,
            max_parents: 4,
            tabu_length: 10,
            tabu_max_stalls: 15,
            random_restarts: 0,
            cam_prune_alpha: 0.001,
            seed: 0,
        }
    }
}

/// Column-major data with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, cols: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != cols.len() {
            return Err(Error::InvalidGraph(format!("{} names for {} columns", names.len(), cols.len())));
        }
        if names.len() > crate::graph::MAX_NODES {
            return Err(Error::Config(format!("at most {} variables", crate::graph::MAX_NODES)));
        }
        let n = cols.first().map_or(0, |c| c.len());
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::Degenerate("columns differ in length".into()));
        }
        if n <= cols.len() {
            return Err(Error::TooFew {
                what: "rows (must exceed the number of variables)",
                needed: cols.len() + 1,
                got: n,
            });
        }
        for (name, c) in names.iter().zip(&cols) {
            check_finite(c, name)?;
            if crate::stats::pop_variance(c) == 0.0 {
                return Err(Error::Degenerate(format!("column {name} is constant")));
            }
        }
        Ok(Dataset { names, cols })
    }

    /// Builds a dataset from rows of equal length.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        let cols = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Dataset::new(names, cols)
    }

    /// The given parameters of one position as columns.
    pub fn from_table(table: &ParameterTable, position: Position, params: &[ParameterName]) -> Result<Self> {
        let names = params.iter().map(|p| p.as_str().to_string()).collect();
        let cols = params.iter().map(|&p| table.column(p, position)).collect();
        Dataset::new(names, cols)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.cols[0].len()
    }

    pub fn p(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    /// Each column rescaled to zero mean and unit population variance.
    pub fn standardized(&self) -> Dataset {
        let cols = self
            .cols
            .iter()
            .map(|c| {
                let m = crate::stats::mean(c);
                let s = crate::stats::pop_std(c);
                c.iter().map(|v| (v - m) / s).collect()
            })
            .collect();
        Dataset {
            names: self.names.clone(),
            cols,
        }
    }
}

pub(crate) fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask & (1 << i) != 0)
}
