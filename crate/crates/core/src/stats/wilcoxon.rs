//! Wilcoxon signed-rank test on paired differences.
//!
//! Zero differences are dropped and tied magnitudes receive averaged ranks.
//! Up to [`EXACT_MAX_N`] nonzero differences the null distribution is
//! computed exactly, conditional on the tie pattern; above that a normal
//! approximation with tie and continuity corrections is used.

use crate::error::{Error, Result};

use super::normal_sf;

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedRank {
    /// Sum of ranks of the positive differences (W+).
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub exact: bool,
}

/// Averaged ranks of `values` (1-based), in input order.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn signed_rank_test(diffs: &[f64]) -> Result<SignedRank> {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let mags: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&mags);
    let w_plus: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    if n <= EXACT_MAX_N {
        // doubled ranks are integers even with ties
        let r2: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = r2.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        let mut reach = 0;
        for &r in &r2 {
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let all = 2f64.powi(n as i32);
        let w2 = (2.0 * w_plus).round() as usize;
        let le: f64 = counts[..=w2].iter().sum();
        let ge: f64 = counts[w2..].iter().sum();
        let p = (2.0 * le.min(ge) / all).min(1.0);
        return Ok(SignedRank {
            statistic: w_plus,
            p_value: p,
            n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w_plus - mu).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(SignedRank {
        statistic: w_plus,
        p_value: (2.0 * normal_sf(z)).min(1.0),
        n,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn small_exact_reference() {
        // scipy.stats.wilcoxon(d, method="exact"): W- = 5, p = 0.078125
        let d = [1.5, 2.0, -0.5, 3.0, 4.0, -2.5, 5.0, 6.0];
        let r = signed_rank_test(&d).unwrap();
        assert!(r.exact);
        assert_eq!(r.statistic, 36.0 - 5.0);
        assert!((r.p_value - 0.078125).abs() < 1e-12, "{}", r.p_value);
    }

    #[test]
    fn all_positive_hits_minimum_p() {
        let d: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let r = signed_rank_test(&d).unwrap();
        assert_eq!(r.p_value, 2.0 / 2f64.powi(20));
    }

    #[test]
    fn zeros_dropped_and_all_zero_is_error() {
        let r = signed_rank_test(&[0.0, 1.0, 2.0, 0.0, -3.0]).unwrap();
        assert_eq!(r.n, 3);
        assert!(signed_rank_test(&[0.0; 6]).is_err());
    }

    #[test]
    fn normal_approximation_above_25() {
        let d: Vec<f64> = (1..=40).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let r = signed_rank_test(&d).unwrap();
        assert!(!r.exact);
        // scipy.stats.wilcoxon(d, correction=True, method="approx")
        assert!((r.p_value - 0.066_544_654_968_581_46).abs() < 1e-9, "{}", r.p_value);
    }
}
