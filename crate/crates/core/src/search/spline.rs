//! Penalized additive regression with cubic regression spline terms.
//!
//! Each term uses a natural cubic spline parameterized by its values at the
//! knots, with an integrated squared second-derivative penalty and a
//! sum-to-zero constraint. All terms share one smoothing parameter chosen by
//! generalized cross-validation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) const MAX_KNOTS: usize = 10;
const MIN_KNOTS: usize = 4;

struct CrBasis {
    knots: Vec<f64>,
    /// Maps knot values to second derivatives at the knots.
    f: DMatrix<f64>,
    penalty: DMatrix<f64>,
}

impl CrBasis {
    fn new(x: &[f64], k: usize) -> Result<Self> {
        let mut u: Vec<f64> = x.to_vec();
        u.sort_by(f64::total_cmp);
        u.dedup();
        if u.len() < MIN_KNOTS {
            return Err(Error::Degenerate(format!(
                "smoother needs {MIN_KNOTS} distinct values, got {}",
                u.len()
            )));
        }
        let k = k.min(u.len());
        let knots: Vec<f64> = (0..k)
            .map(|i| u[((i * (u.len() - 1)) as f64 / (k - 1) as f64).round() as usize])
            .collect();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut d = DMatrix::zeros(k - 2, k);
        let mut b = DMatrix::zeros(k - 2, k - 2);
        for i in 0..k - 2 {
            d[(i, i)] = 1.0 / h[i];
            d[(i, i + 1)] = -1.0 / h[i] - 1.0 / h[i + 1];
            d[(i, i + 2)] = 1.0 / h[i + 1];
            b[(i, i)] = (h[i] + h[i + 1]) / 3.0;
            if i + 1 < k - 2 {
                b[(i, i + 1)] = h[i + 1] / 6.0;
                b[(i + 1, i)] = h[i + 1] / 6.0;
            }
        }
        let b_inv_d = b
            .cholesky()
            .ok_or_else(|| Error::Degenerate("spline knot system is singular".into()))?
            .solve(&d);
        let penalty = d.transpose() * &b_inv_d;
        let mut f = DMatrix::zeros(k, k);
        f.view_mut((1, 0), (k - 2, k)).copy_from(&b_inv_d);
        Ok(CrBasis { knots, f, penalty })
    }

    fn k(&self) -> usize {
        self.knots.len()
    }

    fn design(&self, x: &[f64]) -> DMatrix<f64> {
        let k = self.k();
        let (lo, hi) = (self.knots[0], self.knots[k - 1]);
        let mut out = DMatrix::zeros(x.len(), k);
        for (r, &xv) in x.iter().enumerate() {
            let xv = xv.clamp(lo, hi);
            let j = match self.knots.partition_point(|&t| t <= xv) {
                0 => 0,
                i => (i - 1).min(k - 2),
            };
            let h = self.knots[j + 1] - self.knots[j];
            let (dm, dp) = (self.knots[j + 1] - xv, xv - self.knots[j]);
            let cm = (dm * dm * dm / h - h * dm) / 6.0;
            let cp = (dp * dp * dp / h - h * dp) / 6.0;
            out[(r, j)] += dm / h;
            out[(r, j + 1)] += dp / h;
            for c in 0..k {
                out[(r, c)] += cm * self.f[(j, c)] + cp * self.f[(j + 1, c)];
            }
        }
        out
    }
}

/// Orthonormal basis of the null space of the row vector `c` (Householder).
fn null_space_of_row(c: &DVector<f64>) -> DMatrix<f64> {
    let k = c.len();
    let norm = c.norm();
    let mut v = c.clone();
    v[0] += if c[0] >= 0.0 { norm } else { -norm };
    let vv = v.dot(&v);
    let h = DMatrix::identity(k, k) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, k - 1).into_owned()
}

/// Knots per term so the design stays well below the sample size.
pub(crate) fn knots_for(n: usize, terms: usize) -> usize {
    if terms == 0 {
        return MAX_KNOTS;
    }
    ((n / 2).saturating_sub(1) / terms + 1).clamp(MIN_KNOTS, MAX_KNOTS)
}

#[derive(Debug, Clone)]
pub(crate) struct AdditiveFit {
    pub rss: f64,
    /// Approximate F-test p-value of each smooth term.
    pub term_p: Vec<f64>,
}

/// Fits y = α + Σ f_j(x_j) + ε by penalized least squares.
pub(crate) fn fit_additive(y: &[f64], xs: &[&[f64]], with_pvalues: bool) -> Result<AdditiveFit> {
    let n = y.len();
    let ybar = y.iter().sum::<f64>() / n as f64;
    if xs.is_empty() {
        let rss = y.iter().map(|v| (v - ybar).powi(2)).sum();
        return Ok(AdditiveFit {
            rss,
            term_p: Vec::new(),
        });
    }
    let k = knots_for(n, xs.len());
    let mut blocks = Vec::with_capacity(xs.len());
    for x in xs {
        let basis = CrBasis::new(x, k)?;
        let raw = basis.design(x);
        let colsum = DVector::from_fn(raw.ncols(), |c, _| raw.column(c).sum());
        let z = null_space_of_row(&colsum);
        let xz = &raw * &z;
        let mut s = z.transpose() * &basis.penalty * &z;
        let scale = xz.norm_squared() / s.norm().max(f64::MIN_POSITIVE);
        s *= scale;
        blocks.push((xz, s));
    }
    let d = 1 + blocks.iter().map(|(x, _)| x.ncols()).sum::<usize>();
    let mut x = DMatrix::zeros(n, d);
    let mut s = DMatrix::zeros(d, d);
    x.column_mut(0).fill(1.0);
    let mut ranges = Vec::with_capacity(blocks.len());
    let mut at = 1;
    for (xz, sj) in &blocks {
        let w = xz.ncols();
        x.view_mut((0, at), (n, w)).copy_from(xz);
        s.view_mut((at, at), (w, w)).copy_from(sj);
        ranges.push(at..at + w);
        at += w;
    }
    let yv = DVector::from_column_slice(y);
    let mut xtx = x.transpose() * &x;
    let xty = x.transpose() * &yv;
    let yty = yv.dot(&yv);
    let ridge = 1e-9 * xtx.trace() / d as f64;
    for i in 0..d {
        xtx[(i, i)] += ridge;
    }
    // XᵀX = RᵀR and R⁻ᵀ S R⁻¹ = U Λ Uᵀ turn every λ into a diagonal solve.
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("additive design is rank deficient".into()))?;
    let r = chol.l().transpose();
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("additive design is rank deficient".into()))?;
    let m = r_inv.transpose() * &s * &r_inv;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let u = eig.eigenvectors;
    let lam_s: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let q = u.transpose() * (r_inv.transpose() * &xty);

    let evaluate = |lambda: f64| {
        let shrink = DVector::from_fn(d, |i, _| 1.0 / (1.0 + lambda * lam_s[i]));
        let gamma = q.component_mul(&shrink);
        let beta = &r_inv * (&u * &gamma);
        let fitted_ss = (&xtx * &beta).dot(&beta);
        let rss = (yty - 2.0 * beta.dot(&xty) + fitted_ss).max(0.0);
        let edf = shrink.sum();
        (beta, shrink, rss, edf)
    };
    let mut best: Option<(f64, f64)> = None;
    for step in 0..=48 {
        let lambda = 10f64.powf(-6.0 + 0.25 * step as f64);
        let (_, _, rss, edf) = evaluate(lambda);
        let denom = n as f64 - edf;
        if denom <= 0.0 {
            continue;
        }
        let gcv = n as f64 * rss / (denom * denom);
        if best.is_none_or(|(g, _)| gcv < g) {
            best = Some((gcv, lambda));
        }
    }
    let (_, lambda) = best.ok_or_else(|| Error::Degenerate("no smoothing parameter leaves residual degrees of freedom".into()))?;
    let (beta, shrink, rss, edf) = evaluate(lambda);
    log::trace!("additive fit: lambda {lambda:.3e}, edf {edf:.2}");

    let mut term_p = Vec::new();
    if with_pvalues {
        let resid_df = n as f64 - edf;
        let scale = rss / resid_df;
        let ru = &r_inv * &u;
        let a_inv = &ru * DMatrix::from_diagonal(&shrink) * ru.transpose();
        let influence = &a_inv * &xtx;
        for range in &ranges {
            let w = range.len();
            let edf_j: f64 = range.clone().map(|i| influence[(i, i)]).sum();
            let rank = (edf_j.round() as usize).clamp(1, w);
            let v = a_inv.view((range.start, range.start), (w, w)) * scale;
            let b = beta.rows(range.start, w);
            let e = SymmetricEigen::new((&v + v.transpose()) * 0.5);
            let mut order: Vec<usize> = (0..w).collect();
            order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
            let mut stat = 0.0;
            for &i in order.iter().take(rank) {
                let ev = e.eigenvalues[i];
                if ev > 0.0 {
                    stat += e.eigenvectors.column(i).dot(&b).powi(2) / ev;
                }
            }
            let f = stat / rank as f64;
            term_p.push(crate::stats::f_sf(f, rank as f64, resid_df));
        }
    }
    Ok(AdditiveFit { rss, term_p })
}
