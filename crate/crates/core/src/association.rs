//! Bayesian correlation screening and generalized correlations with the
//! kernel-cause direction rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record_io::{ParameterName, ParameterTable, Position};
use crate::stats::{mean, pearson, pop_variance, student_t_sf};

pub const MPE_GATE: f64 = 0.9;
pub const GC_ALPHA: f64 = 0.05;
pub const MIN_BAYES_N: usize = 4;
pub const MIN_GC_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesRegressionFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub r: f64,
    /// Larger of the posterior probabilities that β > 0 and β < 0.
    pub mpe: f64,
}

fn check_pair(x: &[f64], y: &[f64], min_n: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Degenerate(format!("paired series differ in length: {} vs {}", x.len(), y.len())));
    }
    if x.len() < min_n {
        return Err(Error::TooFew {
            what: "paired observations",
            needed: min_n,
            got: x.len(),
        });
    }
    crate::error::check_finite(x, "x")?;
    crate::error::check_finite(y, "y")?;
    if pop_variance(x) == 0.0 || pop_variance(y) == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(())
}

/// Fits X = α + βY + ε under the flat-limit normal–inverse-gamma prior.
/// The posterior of β is Student-t with n − 2 degrees of freedom centered
/// at the least-squares slope, so r = β·σ_y/σ_x is the sample Pearson
/// coefficient and the MPE has a closed form.
pub fn bayes_correlation(x: &[f64], y: &[f64]) -> Result<BayesRegressionFit> {
    check_pair(x, y, MIN_BAYES_N)?;
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut syy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let beta = sxy / syy;
    let alpha = mx - beta * my;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (a - alpha - beta * b).powi(2)).sum();
    let se = (rss / (n - 2.0) / syy).sqrt();
    let mpe = if se > 0.0 {
        1.0 - student_t_sf(beta.abs() / se, n - 2.0)
    } else {
        1.0
    };
    let (sigma_x, sigma_y) = (pop_variance(x).sqrt(), pop_variance(y).sqrt());
    Ok(BayesRegressionFit {
        alpha_hat: alpha,
        beta_hat: beta,
        sigma_x,
        sigma_y,
        r: (beta * sigma_y / sigma_x).clamp(-1.0, 1.0),
        mpe: mpe.clamp(0.5, 1.0),
    })
}

/// Pairwise Bayesian correlations for one position. `r[i][j]` is present
/// when the fit passes the MPE gate; the diagonal is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub position: Position,
    pub n: usize,
    pub r: Vec<Vec<Option<f64>>>,
    pub mpe: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: ParameterName, b: ParameterName) -> Option<f64> {
        self.r[a.index()][b.index()]
    }

    /// CSV with blank cells for entries that did not pass the gate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter");
        for p in ParameterName::ALL {
            out.push(',');
            out.push_str(p.as_str());
        }
        out.push('\n');
        for a in ParameterName::ALL {
            out.push_str(a.as_str());
            for b in ParameterName::ALL {
                out.push(',');
                if let Some(v) = self.get(a, b) {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn correlation_matrix(table: &ParameterTable, position: Position) -> Result<CorrelationMatrix> {
    let n = table.position_rows(position).count();
    if n < MIN_BAYES_N {
        return Err(Error::TooFew {
            what: "subjects in position",
            needed: MIN_BAYES_N,
            got: n,
        });
    }
    let cols: Vec<Vec<f64>> = ParameterName::ALL.iter().map(|&p| table.column(p, position)).collect();
    let mut r = vec![vec![None; 10]; 10];
    let mut mpe = vec![vec![None; 10]; 10];
    for i in 0..10 {
        for j in i + 1..10 {
            let fit = match bayes_correlation(&cols[i], &cols[j]) {
                Ok(f) => f,
                Err(Error::Degenerate(msg)) => {
                    log::warn!(
                        "{position}: {} vs {}: {msg}",
                        ParameterName::ALL[i],
                        ParameterName::ALL[j]
                    );
                    continue;
                }
                Err(e) => return Err(e),
            };
            mpe[i][j] = Some(fit.mpe);
            mpe[j][i] = Some(fit.mpe);
            if fit.mpe > MPE_GATE {
                r[i][j] = Some(fit.r);
                r[j][i] = Some(fit.r);
            }
        }
    }
    Ok(CorrelationMatrix { position, n, r, mpe })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    XcausesY,
    YcausesX,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedCorrPair {
    pub r_pearson: f64,
    pub r_star_y_given_x: f64,
    pub r_star_x_given_y: f64,
    pub gmc_y_given_x: f64,
    pub gmc_x_given_y: f64,
    pub direction: Direction,
    /// One-sided p-value that the winning direction's leave-one-out kernel
    /// prediction correlates positively with its target; 1 on a tie.
    pub gate_p: f64,
}

/// Leave-one-out Nadaraya–Watson predictions of `y` from `x` with a
/// Gaussian kernel and Silverman's bandwidth 1.06·σ·n^(−1/5). Weights are
/// taken relative to each point's nearest neighbour so they never all
/// underflow.
pub fn loo_kernel_predictions(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let sigma = pop_variance(x).sqrt();
    let h = 1.06 * sigma * (n as f64).powf(-0.2);
    if !(h > 0.0) {
        return Err(Error::Degenerate("zero kernel bandwidth".into()));
    }
    let inv = 1.0 / (2.0 * h * h);
    let pred = (0..n)
        .map(|i| {
            let d_min = (0..n)
                .filter(|&j| j != i)
                .map(|j| (x[i] - x[j]).powi(2))
                .fold(f64::INFINITY, f64::min);
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = (-((x[i] - x[j]).powi(2) - d_min) * inv).exp();
                num += w * y[j];
                den += w;
            }
            num / den
        })
        .collect();
    Ok(pred)
}

fn gmc(target: &[f64], pred: &[f64]) -> f64 {
    let resid = target.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / target.len() as f64;
    (1.0 - resid / pop_variance(target)).clamp(0.0, 1.0)
}

fn one_sided_corr_p(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let r = pearson(a, b);
    if !r.is_finite() {
        return 1.0;
    }
    if r >= 1.0 {
        return 0.0;
    }
    let t = r * ((n - 2.0) / (1.0 - r * r)).sqrt();
    student_t_sf(t, n - 2.0)
}

/// Generalized correlations in both directions and the kernel-cause rule:
/// X is the kernel cause of Y when Y is better predicted from X than X from
/// Y (|r*_y|x| > |r*_x|y|) and the gate p-value is below 0.05.
pub fn generalized_corr_pair(x: &[f64], y: &[f64]) -> Result<GeneralizedCorrPair> {
    check_pair(x, y, MIN_GC_N)?;
    let r = pearson(x, y);
    let y_hat = loo_kernel_predictions(x, y)?;
    let x_hat = loo_kernel_predictions(y, x)?;
    let gmc_yx = gmc(y, &y_hat);
    let gmc_xy = gmc(x, &x_hat);
    let sign = if r < 0.0 { -1.0 } else { 1.0 };
    let (rs_yx, rs_xy) = (sign * gmc_yx.sqrt(), sign * gmc_xy.sqrt());
    let (direction, gate_p) = if gmc_yx > gmc_xy {
        let p = one_sided_corr_p(y, &y_hat);
        (if p < GC_ALPHA { Direction::XcausesY } else { Direction::Undecided }, p)
    } else if gmc_xy > gmc_yx {
        let p = one_sided_corr_p(x, &x_hat);
        (if p < GC_ALPHA { Direction::YcausesX } else { Direction::Undecided }, p)
    } else {
        (Direction::Undecided, 1.0)
    };
    Ok(GeneralizedCorrPair {
        r_pearson: r,
        r_star_y_given_x: rs_yx,
        r_star_x_given_y: rs_xy,
        gmc_y_given_x: gmc_yx,
        gmc_x_given_y: gmc_xy,
        direction,
        gate_p,
    })
}
