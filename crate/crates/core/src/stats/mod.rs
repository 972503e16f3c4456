//! Descriptive statistics, distribution tails and the classical tests used
//! by the paired-position comparison.

mod shapiro;
mod wilcoxon;

pub use shapiro::{shapiro_wilk, ShapiroWilk};
pub use wilcoxon::{signed_rank_test, SignedRank};

use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (divisor n).
pub fn pop_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn pop_std(x: &[f64]) -> f64 {
    pop_variance(x).sqrt()
}

/// Sample variance (divisor n - 1).
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Median; reorders the slice.
pub fn median(x: &mut [f64]) -> f64 {
    assert!(!x.is_empty());
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

/// P(Z > z) for a standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// P(T > t) for Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    StudentsT::new(0.0, 1.0, df).unwrap().sf(t)
}

/// P(F > f) for the F distribution.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if !(f > 0.0) {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    FisherSnedecor::new(df1, df2).unwrap().sf(f)
}

/// Two-sided p-value of the Pearson correlation test (t with n - 2 df).
pub fn pearson_test_p(r: f64, n: usize) -> f64 {
    let df = n as f64 - 2.0;
    let r2 = (r * r).min(1.0);
    if r2 >= 1.0 {
        return 0.0;
    }
    let t = r.abs() * (df / (1.0 - r2)).sqrt();
    (2.0 * student_t_sf(t, df)).min(1.0)
}

/// Paired t statistic and two-sided p-value on differences.
pub fn paired_t(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len() as f64;
    let m = mean(diffs);
    let se = (sample_variance(diffs) / n).sqrt();
    let t = m / se;
    if t.is_nan() {
        return (0.0, 1.0);
    }
    (t, (2.0 * student_t_sf(t.abs(), n - 1.0)).min(1.0))
}
