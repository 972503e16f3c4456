//! Gaussian BIC, decomposable over nodes.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{bits, Dataset};
use crate::graph::Dag;

/// Local scores from the (divisor n) covariance matrix, memoized by
/// (node, parent set).
pub struct BicScorer {
    n: f64,
    cov: DMatrix<f64>,
    cache: RefCell<HashMap<(usize, u32), f64>>,
}

/// Relative pivot below which a parent covariance block counts as singular.
const SINGULAR_PIVOT: f64 = 1e-10;

impl BicScorer {
    pub fn new(data: &Dataset) -> Self {
        let p = data.p();
        let n = data.n();
        let means: Vec<f64> = (0..p).map(|j| crate::stats::mean(data.column(j))).collect();
        let mut cov = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let (ca, cb) = (data.column(a), data.column(b));
                let s: f64 = ca
                    .iter()
                    .zip(cb)
                    .map(|(x, y)| (x - means[a]) * (y - means[b]))
                    .sum::<f64>()
                    / n as f64;
                cov[(a, b)] = s;
                cov[(b, a)] = s;
            }
        }
        BicScorer {
            n: n as f64,
            cov,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn p(&self) -> usize {
        self.cov.nrows()
    }

    /// −n/2·(ln 2πσ̂² + 1) − (|S| + 2)/2·ln n, where σ̂² is the maximum
    /// likelihood residual variance of `node` regressed on `parents`;
    /// −∞ when the parent columns are collinear.
    pub fn local(&self, node: usize, parents: u32) -> f64 {
        if let Some(&s) = self.cache.borrow().get(&(node, parents)) {
            return s;
        }
        let s = self.compute_local(node, parents);
        self.cache.borrow_mut().insert((node, parents), s);
        s
    }

    fn compute_local(&self, node: usize, parents: u32) -> f64 {
        let idx: Vec<usize> = bits(parents).collect();
        let k = idx.len();
        let c_ii = self.cov[(node, node)];
        let var = if k == 0 {
            c_ii
        } else {
            let c_ss = DMatrix::from_fn(k, k, |a, b| self.cov[(idx[a], idx[b])]);
            let c_si = DVector::from_fn(k, |a, _| self.cov[(idx[a], node)]);
            let Some(chol) = c_ss.clone().cholesky() else {
                return f64::NEG_INFINITY;
            };
            let l = chol.l();
            if (0..k).any(|j| l[(j, j)] * l[(j, j)] <= SINGULAR_PIVOT * c_ss[(j, j)]) {
                return f64::NEG_INFINITY;
            }
            let beta = chol.solve(&c_si);
            c_ii - c_si.dot(&beta)
        };
        let var = var.max(c_ii * 1e-15);
        let params = k as f64 + 2.0;
        -0.5 * self.n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0) - 0.5 * params * self.n.ln()
    }

    pub fn score(&self, dag: &Dag) -> f64 {
        (0..dag.len()).map(|j| self.local(j, dag.parents(j))).sum()
    }
}

pub fn bic_score(data: &Dataset, dag: &Dag) -> f64 {
    BicScorer::new(data).score(dag)
}
