//! Three-variable mediation by least squares with the first-order Sobel
//! test of the indirect effect.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::stats::{mean, normal_sf};

pub const MIN_MEDIATION_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediationFit {
    pub n: usize,
    /// Slope of m on x.
    pub a_hat: f64,
    pub se_a: f64,
    /// Slope of y on m, adjusting for x.
    pub b_hat: f64,
    pub se_b: f64,
    /// Slope of y on x, adjusting for m.
    pub direct_effect: f64,
    pub indirect_effect: f64,
    pub sobel_z: f64,
    pub sobel_p: f64,
}

/// Sobel z and two-sided p. A zero standard error gives z = 0, p = 1.
pub fn sobel(a: f64, se_a: f64, b: f64, se_b: f64) -> (f64, f64) {
    let denom = (b * b * se_a * se_a + a * a * se_b * se_b).sqrt();
    if !(denom > 0.0) {
        return (0.0, 1.0);
    }
    let z = a * b / denom;
    (z, (2.0 * normal_sf(z.abs())).min(1.0))
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    v.iter().map(|x| x - m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mediation_fit(x: &[f64], m: &[f64], y: &[f64]) -> Result<MediationFit> {
    let n = x.len();
    if m.len() != n || y.len() != n {
        return Err(Error::Degenerate("mediation inputs differ in length".into()));
    }
    if n < MIN_MEDIATION_N {
        return Err(Error::TooFew {
            what: "observations for mediation",
            needed: MIN_MEDIATION_N,
            got: n,
        });
    }
    check_finite(x, "x")?;
    check_finite(m, "m")?;
    check_finite(y, "y")?;
    let (xc, mc, yc) = (centered(x), centered(m), centered(y));
    let (sxx, smm, sxm) = (dot(&xc, &xc), dot(&mc, &mc), dot(&xc, &mc));
    let (sxy, smy) = (dot(&xc, &yc), dot(&mc, &yc));
    if sxx <= 0.0 || smm <= 0.0 {
        return Err(Error::Degenerate("mediation input has zero variance".into()));
    }
    let nf = n as f64;

    let a = sxm / sxx;
    let rss_a: f64 = xc.iter().zip(&mc).map(|(xi, mi)| (mi - a * xi).powi(2)).sum();
    let se_a = (rss_a / (nf - 2.0) / sxx).sqrt();

    let det = sxx * smm - sxm * sxm;
    if det <= 1e-12 * sxx * smm {
        return Err(Error::Degenerate("mediator is collinear with the exposure".into()));
    }
    let b = (sxx * smy - sxm * sxy) / det;
    let c = (smm * sxy - sxm * smy) / det;
    let rss_b: f64 = (0..n).map(|i| (yc[i] - b * mc[i] - c * xc[i]).powi(2)).sum();
    let se_b = (rss_b / (nf - 3.0) * sxx / det).sqrt();

    let (sobel_z, sobel_p) = sobel(a, se_a, b, se_b);
    Ok(MediationFit {
        n,
        a_hat: a,
        se_a,
        b_hat: b,
        se_b,
        direct_effect: c,
        indirect_effect: a * b,
        sobel_z,
        sobel_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn z(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn sample(rng: &mut ChaCha8Rng, n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n).map(|_| z(rng)).collect();
        let m: Vec<f64> = x.iter().map(|v| a * v + z(rng)).collect();
        let y: Vec<f64> = (0..n).map(|i| b * m[i] + 0.3 * x[i] + z(rng)).collect();
        (x, m, y)
    }

    #[test]
    fn matches_matrix_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let (x, m, y) = sample(&mut rng, 40, 0.5, 0.7);
        let fit = mediation_fit(&x, &m, &y).unwrap();
        let design = DMatrix::from_fn(40, 3, |i, j| [1.0, m[i], x[i]][j]);
        let yv = DVector::from_column_slice(&y);
        let xtx_inv = (design.transpose() * &design).try_inverse().unwrap();
        let beta = &xtx_inv * design.transpose() * &yv;
        let resid = &yv - &design * &beta;
        let s2 = resid.norm_squared() / 37.0;
        assert!((fit.b_hat - beta[1]).abs() < 1e-10);
        assert!((fit.direct_effect - beta[2]).abs() < 1e-10);
        assert!((fit.se_b - (s2 * xtx_inv[(1, 1)]).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn strong_mediation_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let x: Vec<f64> = (0..1000).map(|_| z(&mut rng)).collect();
        let m: Vec<f64> = x.iter().map(|v| v + 0.1 * z(&mut rng)).collect();
        let y: Vec<f64> = m.iter().map(|v| v + 0.1 * z(&mut rng)).collect();
        let fit = mediation_fit(&x, &m, &y).unwrap();
        assert!((fit.indirect_effect - 1.0).abs() < 0.05);
        assert!(fit.sobel_p < 1e-6);
    }

    #[test]
    fn null_mediator_rarely_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let trials = 400;
        let mut ok = 0;
        for _ in 0..trials {
            let (x, m, y) = sample(&mut rng, 100, 0.0, 0.5);
            ok += usize::from(mediation_fit(&x, &m, &y).unwrap().sobel_p >= 0.05);
        }
        assert!(ok as f64 / trials as f64 >= 0.94, "{ok}");
    }

    #[test]
    fn zero_denominator_convention() {
        assert_eq!(sobel(0.0, 0.0, 0.0, 0.0), (0.0, 1.0));
        assert_eq!(sobel(0.0, 0.1, 0.0, 0.1), (0.0, 1.0));
    }

    #[test]
    fn collinear_mediator_rejected() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let m: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        assert!(matches!(mediation_fit(&x, &m, &y), Err(Error::Degenerate(_))));
    }

    fn bootstrap_significant(x: &[f64], m: &[f64], y: &[f64], rng: &mut ChaCha8Rng) -> bool {
        let n = x.len();
        let mut ab: Vec<f64> = (0..1000)
            .filter_map(|_| {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
                mediation_fit(&pick(x), &pick(m), &pick(y)).ok().map(|f| f.indirect_effect)
            })
            .collect();
        ab.sort_by(f64::total_cmp);
        let lo = ab[(0.025 * ab.len() as f64) as usize];
        let hi = ab[(0.975 * ab.len() as f64) as usize - 1];
        lo > 0.0 || hi < 0.0
    }

    #[test]
    fn agrees_with_percentile_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let mut agree = 0;
        for k in 0..20 {
            let a = [0.0, 0.15, 0.3, 0.5][k % 4];
            let (x, m, y) = sample(&mut rng, 100, a, 0.4);
            let sobel_sig = mediation_fit(&x, &m, &y).unwrap().sobel_p < 0.05;
            agree += usize::from(sobel_sig == bootstrap_significant(&x, &m, &y, &mut rng));
        }
        assert!(agree >= 17, "{agree}/20");
    }

    proptest! {
        #[test]
        fn mediator_scale_equivariance(seed in any::<u64>(), c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, m, y) = sample(&mut rng, 50, 0.4, 0.6);
            let ms: Vec<f64> = m.iter().map(|v| v * c).collect();
            let f0 = mediation_fit(&x, &m, &y).unwrap();
            let f1 = mediation_fit(&x, &ms, &y).unwrap();
            prop_assert!((f1.a_hat - c * f0.a_hat).abs() <= 1e-9 * (1.0 + (c * f0.a_hat).abs()));
            prop_assert!((f1.b_hat - f0.b_hat / c).abs() <= 1e-9 * (1.0 + (f0.b_hat / c).abs()));
            prop_assert!((f1.indirect_effect - f0.indirect_effect).abs() < 1e-9);
            prop_assert!((f1.sobel_z - f0.sobel_z).abs() < 1e-9);
            prop_assert!((f1.sobel_p - f0.sobel_p).abs() < 1e-9);
        }

        #[test]
        fn p_decreases_with_z(a in 0.01f64..2.0, b in 0.01f64..2.0, k in 1.01f64..3.0) {
            let (z0, p0) = sobel(a, 0.3, b, 0.3);
            let (z1, p1) = sobel(a * k, 0.3, b, 0.3);
            prop_assert!(z1 > z0);
            prop_assert!(p1 <= p0);
        }
    }
}
