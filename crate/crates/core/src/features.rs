//! The ten per-recording parameters and the supine-versus-standing paired
//! comparisons.

use serde::{Deserialize, Serialize};

use crate::cardio::{detect_r_peaks, detrend_ecg, rr_intervals};
use crate::error::{Error, Result};
use crate::record_io::{ParamValues, ParameterName, SignalRecord};
use crate::resp::{delimit_breaths, remove_cardiac_component, BreathSeries};
use crate::stats;

pub const MIN_RR_INTERVALS: usize = 3;
pub const MIN_RESP_BREATHS: usize = 5;
pub const MIN_PAIRED: usize = 8;
pub const NORMALITY_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardiacParams {
    pub hr_bpm: f64,
    pub rmssd_ms: f64,
    pub ln_rmssd: f64,
}

/// Coefficients of variation (population σ over mean) of the breath
/// features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSet {
    pub cv_irr: f64,
    pub cv_ins_t: f64,
    pub cv_exp_t: f64,
    pub cv_ins_v: f64,
    pub cv_exp_v: f64,
}

impl CvSet {
    pub fn as_array(&self) -> [f64; 5] {
        [self.cv_irr, self.cv_ins_t, self.cv_exp_t, self.cv_ins_v, self.cv_exp_v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RespiratoryParams {
    pub rr_brpm: f64,
    pub cv: CvSet,
}

/// HR, RMSSD and lnRMSSD from artifact-free R–R intervals in ms.
pub fn cardiac_params(rr_ms: &[f64]) -> Result<CardiacParams> {
    if rr_ms.len() < MIN_RR_INTERVALS {
        return Err(Error::TooFew {
            what: "R-R intervals",
            needed: MIN_RR_INTERVALS,
            got: rr_ms.len(),
        });
    }
    let hr = 60_000.0 / stats::mean(rr_ms);
    let sq: Vec<f64> = rr_ms.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
    let rmssd = stats::mean(&sq).sqrt();
    if rmssd == 0.0 {
        return Err(Error::Degenerate("RMSSD is zero; lnRMSSD undefined".into()));
    }
    Ok(CardiacParams {
        hr_bpm: hr,
        rmssd_ms: rmssd,
        ln_rmssd: rmssd.ln(),
    })
}

fn cv(x: &[f64]) -> f64 {
    stats::pop_std(x) / stats::mean(x)
}

pub fn respiratory_params(breaths: &BreathSeries) -> Result<RespiratoryParams> {
    if breaths.len() < MIN_RESP_BREATHS {
        return Err(Error::TooFew {
            what: "breaths",
            needed: MIN_RESP_BREATHS,
            got: breaths.len(),
        });
    }
    Ok(RespiratoryParams {
        rr_brpm: 60.0 / stats::mean(&breaths.i_rr_s),
        cv: CvSet {
            cv_irr: cv(&breaths.i_rr_s),
            cv_ins_t: cv(&breaths.ins_t_s),
            cv_exp_t: cv(&breaths.exp_t_s),
            cv_ins_v: cv(&breaths.ins_v),
            cv_exp_v: cv(&breaths.exp_v),
        },
    })
}

/// BR = 100 − 20 · Σ tanh(CV) over the five breathing CVs, in percent.
pub fn breathing_regularity(cv: &CvSet) -> f64 {
    let s: f64 = cv.as_array().iter().map(|c| c.tanh()).sum();
    (100.0 - 20.0 * s).clamp(0.0, 100.0)
}

pub fn assemble(cardiac: &CardiacParams, resp: &RespiratoryParams) -> ParamValues {
    let mut v = [0.0; 10];
    v[ParameterName::Hr.index()] = cardiac.hr_bpm;
    v[ParameterName::Rmssd.index()] = cardiac.rmssd_ms;
    v[ParameterName::LnRmssd.index()] = cardiac.ln_rmssd;
    v[ParameterName::Rr.index()] = resp.rr_brpm;
    v[ParameterName::CiRr.index()] = resp.cv.cv_irr;
    v[ParameterName::CInsT.index()] = resp.cv.cv_ins_t;
    v[ParameterName::CExpT.index()] = resp.cv.cv_exp_t;
    v[ParameterName::CInsV.index()] = resp.cv.cv_ins_v;
    v[ParameterName::CExpV.index()] = resp.cv.cv_exp_v;
    v[ParameterName::Br.index()] = breathing_regularity(&resp.cv);
    ParamValues(v)
}

/// Full signal pipeline for one recording.
pub fn extract_params(record: &SignalRecord) -> Result<ParamValues> {
    let fs = record.sample_rate_hz;
    let ecg = detrend_ecg(&record.ecg, fs)?;
    let beats = detect_r_peaks(&ecg, fs)?;
    let rr = rr_intervals(&beats)?;
    let cardiac = cardiac_params(&rr.clean())?;
    let ip = remove_cardiac_component(&record.ip, &ecg, fs)?;
    let breaths = delimit_breaths(&ip, fs)?;
    let resp = respiratory_params(&breaths)?;
    let params = assemble(&cardiac, &resp);
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairedTest {
    PairedT,
    WilcoxonSignedRank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub parameter: ParameterName,
    pub test_used: PairedTest,
    pub statistic: f64,
    pub p_value: f64,
    /// Shapiro–Wilk p on the differences; 0 when the differences are
    /// constant and normality cannot be assessed.
    pub normality_p: f64,
    pub n: usize,
}

/// Paired comparison of one parameter across positions: a paired t test
/// when the differences pass Shapiro–Wilk at 0.05, otherwise a two-sided
/// Wilcoxon signed-rank test.
pub fn paired_compare(supine: &[f64], standing: &[f64], parameter: ParameterName) -> Result<PairedTestResult> {
    if supine.len() != standing.len() {
        return Err(Error::Degenerate(format!(
            "paired samples differ in length: {} vs {}",
            supine.len(),
            standing.len()
        )));
    }
    if supine.len() < MIN_PAIRED {
        return Err(Error::TooFew {
            what: "paired subjects",
            needed: MIN_PAIRED,
            got: supine.len(),
        });
    }
    let diffs: Vec<f64> = standing.iter().zip(supine).map(|(b, a)| b - a).collect();
    if diffs.iter().all(|d| *d == 0.0) {
        return Err(Error::Degenerate("all paired differences are zero".into()));
    }
    let normality_p = match stats::shapiro_wilk(&diffs) {
        Ok(sw) => sw.p_value,
        Err(Error::Degenerate(_)) => 0.0,
        Err(e) => return Err(e),
    };
    if normality_p >= NORMALITY_ALPHA {
        let (t, p) = stats::paired_t(&diffs);
        Ok(PairedTestResult {
            parameter,
            test_used: PairedTest::PairedT,
            statistic: t,
            p_value: p,
            normality_p,
            n: diffs.len(),
        })
    } else {
        let w = stats::signed_rank_test(&diffs)?;
        Ok(PairedTestResult {
            parameter,
            test_used: PairedTest::WilcoxonSignedRank,
            statistic: w.statistic,
            p_value: w.p_value,
            normality_p,
            n: diffs.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cardiac_examples() {
        let c = cardiac_params(&[800.0, 810.0, 790.0]).unwrap();
        assert!((c.hr_bpm - 75.0).abs() < 1e-12);
        assert!((c.rmssd_ms - 250f64.sqrt()).abs() < 1e-12);
        assert!((c.ln_rmssd - 2.760_730_459).abs() < 1e-8);
        assert!(matches!(cardiac_params(&[1000.0; 3]), Err(Error::Degenerate(_))));
        assert!(matches!(cardiac_params(&[500.0]), Err(Error::TooFew { .. })));
    }

    fn breaths(i_rr: &[f64], ins_v: &[f64]) -> BreathSeries {
        let n = i_rr.len();
        let mut onsets = vec![0.0];
        for r in i_rr {
            onsets.push(onsets.last().unwrap() + r);
        }
        BreathSeries {
            exp_onsets_s: onsets[..n].iter().zip(i_rr).map(|(o, r)| o + 0.4 * r).collect(),
            insp_onsets_s: onsets,
            ins_t_s: i_rr.iter().map(|r| 0.4 * r).collect(),
            exp_t_s: i_rr.iter().map(|r| 0.6 * r).collect(),
            ins_v: ins_v.to_vec(),
            exp_v: vec![1.0; n],
            i_rr_s: i_rr.to_vec(),
        }
    }

    #[test]
    fn respiratory_examples() {
        let r = respiratory_params(&breaths(&[4.0; 5], &[1.0; 5])).unwrap();
        assert!((r.rr_brpm - 15.0).abs() < 1e-12);
        assert!(r.cv.as_array().iter().all(|c| *c == 0.0));

        let r = respiratory_params(&breaths(&[4.0; 5], &[1.0, 1.0, 1.0, 1.0, 2.0])).unwrap();
        assert!((r.cv.cv_ins_v - 1.0 / 3.0).abs() < 1e-12);

        assert!(respiratory_params(&breaths(&[4.0; 4], &[1.0; 4])).is_err());
    }

    #[test]
    fn cvs_ignore_amplitude_scale() {
        let a = respiratory_params(&breaths(&[4.0, 3.5, 4.2, 3.9, 4.4], &[1.0, 1.3, 0.8, 1.1, 0.9])).unwrap();
        let b = respiratory_params(&breaths(&[4.0, 3.5, 4.2, 3.9, 4.4], &[7.0, 9.1, 5.6, 7.7, 6.3])).unwrap();
        assert!((a.cv.cv_ins_v - b.cv.cv_ins_v).abs() < 1e-12);
    }

    #[test]
    fn regularity_examples() {
        let zero = CvSet { cv_irr: 0.0, cv_ins_t: 0.0, cv_exp_t: 0.0, cv_ins_v: 0.0, cv_exp_v: 0.0 };
        assert_eq!(breathing_regularity(&zero), 100.0);
        let big = CvSet { cv_irr: 1e9, cv_ins_t: 1e9, cv_exp_t: 1e9, cv_ins_v: 1e9, cv_exp_v: 1e9 };
        assert_eq!(breathing_regularity(&big), 0.0);
        let tenth = CvSet { cv_irr: 0.1, cv_ins_t: 0.1, cv_exp_t: 0.1, cv_ins_v: 0.1, cv_exp_v: 0.1 };
        // 100 − 100 · tanh(0.1), evaluated independently
        assert!((breathing_regularity(&tenth) - 90.033_200_537_504_41).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn regularity_bounded_and_decreasing(cvs in prop::array::uniform5(0.0f64..5.0), k in 0usize..5, bump in 0.01f64..1.0) {
            let set = |a: [f64; 5]| CvSet { cv_irr: a[0], cv_ins_t: a[1], cv_exp_t: a[2], cv_ins_v: a[3], cv_exp_v: a[4] };
            let br = breathing_regularity(&set(cvs));
            prop_assert!((0.0..=100.0).contains(&br));
            let mut more = cvs;
            more[k] += bump;
            prop_assert!(breathing_regularity(&set(more)) < br);
        }
    }

    #[test]
    fn constant_shift_is_highly_significant() {
        let sup: Vec<f64> = (0..20).map(|i| 50.0 + (i as f64 * 1.7).sin() * 8.0).collect();
        let sta: Vec<f64> = sup.iter().map(|v| v + 10.0).collect();
        let r = paired_compare(&sup, &sta, ParameterName::Hr).unwrap();
        match r.test_used {
            PairedTest::PairedT => assert!(r.p_value < 1e-12),
            PairedTest::WilcoxonSignedRank => assert_eq!(r.p_value, 2.0 / 2f64.powi(20)),
        }
        assert!(matches!(paired_compare(&sup, &sup, ParameterName::Hr), Err(Error::Degenerate(_))));
        assert!(paired_compare(&sup[..7], &sta[..7], ParameterName::Hr).is_err());
        assert!(paired_compare(&sup[..9], &sta[..8], ParameterName::Hr).is_err());
    }

    #[test]
    fn normal_differences_use_t_test() {
        let sup = [5.1, 4.9, 6.2, 5.8, 5.5, 4.7, 6.0, 5.3, 5.9, 5.0];
        let d = [0.3, -0.2, 0.5, 0.1, 0.4, 0.0, 0.2, 0.6, -0.1, 0.3];
        let sta: Vec<f64> = sup.iter().zip(d).map(|(a, b)| a + b).collect();
        let r = paired_compare(&sup, &sta, ParameterName::Rr).unwrap();
        assert_eq!(r.test_used, PairedTest::PairedT);
        assert!(r.normality_p >= 0.05);
        assert_eq!(r.test_used == PairedTest::PairedT, r.normality_p >= NORMALITY_ALPHA);
    }

    #[test]
    fn skewed_differences_use_signed_rank() {
        let sup = [1.0; 10];
        let d = [0.1, 0.2, 0.15, 0.12, 0.18, 0.11, 0.14, 0.13, 5.0, 9.0];
        let sta: Vec<f64> = sup.iter().zip(d).map(|(a, b)| a + b).collect();
        let r = paired_compare(&sup, &sta, ParameterName::CInsV).unwrap();
        assert_eq!(r.test_used, PairedTest::WilcoxonSignedRank);
        assert_eq!(r.statistic, 55.0);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
    }
}
