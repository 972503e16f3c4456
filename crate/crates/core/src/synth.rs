//! Synthetic recordings and cohorts with known ground truth.
//!
//! The ECG model sums Gaussian P, Q, R, S and T waves per beat, with the
//! P and T offsets scaled by the square root of the beat interval. The
//! impedance model joins half-cosine inspirations and expirations breath by
//! breath. The cohort model is a linear structural equation model over the
//! eight freely varying parameters; lnRMSSD and BR are computed from them.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::Result;
use crate::features::{breathing_regularity, CvSet};
use crate::record_io::{ParamValues, ParameterName, ParameterRow, ParameterTable, Position, SignalRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct EcgSpec {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Heart rate at the start; the rate changes linearly to `hr_end_bpm`.
    pub hr_start_bpm: f64,
    pub hr_end_bpm: f64,
    /// Standard deviation of independent beat-interval jitter.
    pub rr_jitter_ms: f64,
    /// White-noise level relative to the clean signal power.
    pub snr_db: Option<f64>,
    /// Baseline wander as (frequency Hz, amplitude mV).
    pub baseline: Option<(f64, f64)>,
    pub offset_mv: f64,
}

impl Default for EcgSpec {
    fn default() -> Self {
        EcgSpec {
            sample_rate_hz: 250.0,
            duration_s: 360.0,
            hr_start_bpm: 75.0,
            hr_end_bpm: 75.0,
            rr_jitter_ms: 0.0,
            snr_db: None,
            baseline: None,
            offset_mv: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEcg {
    pub samples: Vec<f64>,
    /// Ground-truth R-peak times in seconds.
    pub r_peaks_s: Vec<f64>,
}

const FIRST_BEAT_S: f64 = 0.35;

// (offset s, amplitude mV, width s, scales with sqrt(rr))
const WAVES: [(f64, f64, f64, bool); 5] = [
    (-0.17, 0.12, 0.022, true),
    (-0.03, -0.12, 0.009, false),
    (0.0, 1.1, 0.011, false),
    (0.03, -0.25, 0.009, false),
    (0.26, 0.3, 0.05, true),
];

fn add_gaussian(out: &mut [f64], fs: f64, center_s: f64, amp: f64, width_s: f64) {
    let lo = ((center_s - 5.0 * width_s) * fs).floor().max(0.0) as usize;
    let hi = (((center_s + 5.0 * width_s) * fs).ceil() as usize).min(out.len());
    for (i, v) in out.iter_mut().enumerate().take(hi).skip(lo) {
        let z = (i as f64 / fs - center_s) / width_s;
        *v += amp * (-0.5 * z * z).exp();
    }
}

/// Beat times for a linearly changing heart rate with optional jitter.
fn beat_times<R: Rng + ?Sized>(spec: &EcgSpec, rng: &mut R) -> Vec<f64> {
    let jitter = Normal::new(0.0, spec.rr_jitter_ms / 1000.0).expect("finite jitter");
    let mut times = Vec::new();
    let mut t = FIRST_BEAT_S;
    while t < spec.duration_s {
        times.push(t);
        let frac = t / spec.duration_s;
        let hr = spec.hr_start_bpm + (spec.hr_end_bpm - spec.hr_start_bpm) * frac;
        let rr = 60.0 / hr + jitter.sample(rng);
        t += rr.max(0.25);
    }
    times
}

pub fn ecg<R: Rng + ?Sized>(spec: &EcgSpec, rng: &mut R) -> SyntheticEcg {
    let fs = spec.sample_rate_hz;
    let n = (spec.duration_s * fs).round() as usize;
    let peaks = beat_times(spec, rng);
    let mut x = vec![0.0; n];
    for (k, &t) in peaks.iter().enumerate() {
        let rr = peaks
            .get(k + 1)
            .map(|next| next - t)
            .unwrap_or(60.0 / spec.hr_end_bpm);
        let s = rr.sqrt();
        for (offset, amp, width, scaled) in WAVES {
            let (o, w) = if scaled { (offset * s, width * s) } else { (offset, width) };
            add_gaussian(&mut x, fs, t + o, amp, w);
        }
    }
    if let Some(snr) = spec.snr_db {
        let power = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let sd = (power / 10f64.powf(snr / 10.0)).sqrt();
        for v in &mut x {
            let z: f64 = StandardNormal.sample(rng);
            *v += sd * z;
        }
    }
    if let Some((f, a)) = spec.baseline {
        for (i, v) in x.iter_mut().enumerate() {
            *v += a * (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin();
        }
    }
    for v in &mut x {
        *v += spec.offset_mv;
    }
    SyntheticEcg {
        samples: x,
        r_peaks_s: peaks,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreathSpec {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub rate_brpm: f64,
    /// Peak-to-trough amplitude in impedance units.
    pub amplitude: f64,
    /// Fraction of each breath spent inhaling.
    pub ins_fraction: f64,
    /// Coefficients of variation of breath period, inspiratory fraction and
    /// inspiratory and expiratory amplitude.
    pub cv_period: f64,
    pub cv_ins_fraction: f64,
    pub cv_ins_amp: f64,
    pub cv_exp_amp: f64,
    pub noise_sd: f64,
    pub offset: f64,
}

impl Default for BreathSpec {
    fn default() -> Self {
        BreathSpec {
            sample_rate_hz: 250.0,
            duration_s: 360.0,
            rate_brpm: 15.0,
            amplitude: 1.0,
            ins_fraction: 0.45,
            cv_period: 0.0,
            cv_ins_fraction: 0.0,
            cv_ins_amp: 0.0,
            cv_exp_amp: 0.0,
            noise_sd: 0.0,
            offset: 0.0,
        }
    }
}

fn jittered<R: Rng + ?Sized>(mean: f64, cv: f64, lo: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (mean * (1.0 + cv * z)).max(lo)
}

/// Impedance trace built breath by breath. The level drifts because
/// inspiratory and expiratory amplitudes are drawn independently; the
/// returned trace is the sum of the half-cosine phases.
pub fn impedance<R: Rng + ?Sized>(spec: &BreathSpec, rng: &mut R) -> Vec<f64> {
    let fs = spec.sample_rate_hz;
    let n = (spec.duration_s * fs).round() as usize;
    let mut x = Vec::with_capacity(n);
    let mut level = 0.0;
    let period = 60.0 / spec.rate_brpm;
    while x.len() < n {
        let t = jittered(period, spec.cv_period, 0.3 * period, rng);
        let q = jittered(spec.ins_fraction, spec.cv_ins_fraction, 0.2, rng).min(0.8);
        let a_in = jittered(spec.amplitude, spec.cv_ins_amp, 0.1 * spec.amplitude, rng);
        let a_out = jittered(spec.amplitude, spec.cv_exp_amp, 0.1 * spec.amplitude, rng);
        // pull the level back toward zero so it does not random-walk
        let a_out = (a_out + 0.2 * level).max(0.1 * spec.amplitude);
        let ti = ((t * q * fs).round() as usize).max(2);
        let te = ((t * (1.0 - q) * fs).round() as usize).max(2);
        for k in 0..ti {
            let phase = std::f64::consts::PI * k as f64 / ti as f64;
            x.push(level + 0.5 * a_in * (1.0 - phase.cos()));
        }
        let top = level + a_in;
        for k in 0..te {
            let phase = std::f64::consts::PI * k as f64 / te as f64;
            x.push(top - 0.5 * a_out * (1.0 - phase.cos()));
        }
        level = top - a_out;
    }
    x.truncate(n);
    if spec.noise_sd > 0.0 {
        for v in &mut x {
            let z: f64 = StandardNormal.sample(rng);
            *v += spec.noise_sd * z;
        }
    }
    for v in &mut x {
        *v += spec.offset;
    }
    x
}

/// Nodes of the cohort model: the eight parameters that are not computed
/// from other parameters.
pub const FREE_PARAMETERS: [ParameterName; 8] = [
    ParameterName::Hr,
    ParameterName::Rmssd,
    ParameterName::Rr,
    ParameterName::CiRr,
    ParameterName::CInsT,
    ParameterName::CExpT,
    ParameterName::CInsV,
    ParameterName::CExpV,
];

/// Directed edges of the cohort model with standardized path weights.
pub const COHORT_EDGES: [(ParameterName, ParameterName, f64); 9] = [
    (ParameterName::Rmssd, ParameterName::Hr, -0.6),
    (ParameterName::Rr, ParameterName::Hr, 0.5),
    (ParameterName::Rr, ParameterName::CiRr, -0.6),
    (ParameterName::CiRr, ParameterName::CInsT, 0.7),
    (ParameterName::CInsT, ParameterName::CExpT, 0.6),
    (ParameterName::Hr, ParameterName::CExpT, 0.5),
    (ParameterName::CInsT, ParameterName::CInsV, 0.7),
    (ParameterName::CInsV, ParameterName::CExpV, 0.8),
    (ParameterName::Rmssd, ParameterName::CExpV, 0.4),
];

/// (mean, standard deviation) of each free parameter by position.
fn marginal(name: ParameterName, position: Position) -> (f64, f64) {
    use ParameterName::*;
    let standing = position == Position::Standing;
    match name {
        Hr => if standing { (82.0, 10.0) } else { (64.0, 8.0) },
        Rmssd => if standing { (32.0, 9.0) } else { (58.0, 14.0) },
        Rr => if standing { (16.0, 3.0) } else { (13.5, 2.5) },
        CiRr => if standing { (0.30, 0.07) } else { (0.22, 0.06) },
        CInsT => if standing { (0.26, 0.06) } else { (0.19, 0.05) },
        CExpT => if standing { (0.30, 0.07) } else { (0.23, 0.06) },
        CInsV => if standing { (0.34, 0.08) } else { (0.25, 0.06) },
        CExpV => if standing { (0.36, 0.08) } else { (0.27, 0.06) },
        LnRmssd | Br => unreachable!("derived parameter"),
    }
}

/// Draws one parameter vector from the cohort model; standardized node
/// values are mapped to physiological units by the position's marginals.
fn draw_params<R: Rng + ?Sized>(position: Position, rng: &mut R) -> ParamValues {
    loop {
        let mut z = [0.0f64; 10];
        // FREE_PARAMETERS order is not topological; resolve by repeated passes
        let mut done = [false; 10];
        while FREE_PARAMETERS.iter().any(|p| !done[p.index()]) {
            for &node in &FREE_PARAMETERS {
                if done[node.index()] {
                    continue;
                }
                let parents: Vec<_> = COHORT_EDGES.iter().filter(|e| e.1 == node).collect();
                if parents.iter().any(|e| !done[e.0.index()]) {
                    continue;
                }
                let explained: f64 = parents.iter().map(|e| e.2 * e.2).sum();
                let noise_sd = (1.0 - explained).max(0.3).sqrt();
                let e: f64 = StandardNormal.sample(rng);
                z[node.index()] = parents.iter().map(|p| p.2 * z[p.0.index()]).sum::<f64>() + noise_sd * e;
                done[node.index()] = true;
            }
        }
        let mut v = [0.0f64; 10];
        for &node in &FREE_PARAMETERS {
            let (m, s) = marginal(node, position);
            v[node.index()] = m + s * z[node.index()];
        }
        v[ParameterName::LnRmssd.index()] = v[ParameterName::Rmssd.index()].ln();
        let cv = CvSet {
            cv_irr: v[ParameterName::CiRr.index()],
            cv_ins_t: v[ParameterName::CInsT.index()],
            cv_exp_t: v[ParameterName::CExpT.index()],
            cv_ins_v: v[ParameterName::CInsV.index()],
            cv_exp_v: v[ParameterName::CExpV.index()],
        };
        v[ParameterName::Br.index()] = breathing_regularity(&cv);
        let params = ParamValues(v);
        if params.validate().is_ok() && v.iter().all(|x| x.is_finite()) {
            return params;
        }
    }
}

/// A cohort of `subjects` subjects measured in both positions, with subject
/// ids `s001`, `s002`, ….
pub fn cohort<R: Rng + ?Sized>(subjects: usize, rng: &mut R) -> Result<ParameterTable> {
    let mut table = ParameterTable::new();
    for s in 0..subjects {
        for position in Position::ALL {
            table.push(ParameterRow {
                subject_id: format!("s{:03}", s + 1),
                position,
                params: draw_params(position, rng),
            })?;
        }
    }
    Ok(table)
}

/// Raw recordings whose cardiac and breathing statistics follow a subject's
/// target parameters. Heart-rate variability comes from independent beat
/// jitter, so RMSSD ≈ √2 · jitter.
pub fn signal_record<R: Rng + ?Sized>(
    subject_id: &str,
    position: Position,
    target: &ParamValues,
    duration_s: f64,
    rng: &mut R,
) -> Result<SignalRecord> {
    let fs = 250.0;
    let hr = target[ParameterName::Hr];
    let ecg_spec = EcgSpec {
        sample_rate_hz: fs,
        duration_s,
        hr_start_bpm: hr,
        hr_end_bpm: hr,
        rr_jitter_ms: target[ParameterName::Rmssd] / std::f64::consts::SQRT_2,
        snr_db: Some(25.0),
        baseline: Some((0.15, 0.2)),
        offset_mv: 1.5,
    };
    let e = ecg(&ecg_spec, rng);
    let breath_spec = BreathSpec {
        sample_rate_hz: fs,
        duration_s,
        rate_brpm: target[ParameterName::Rr],
        amplitude: 1.0,
        ins_fraction: 0.42,
        cv_period: target[ParameterName::CiRr],
        cv_ins_fraction: 0.5 * target[ParameterName::CInsT],
        cv_ins_amp: target[ParameterName::CInsV],
        cv_exp_amp: target[ParameterName::CExpV],
        noise_sd: 0.005,
        offset: 500.0,
    };
    let mut ip = impedance(&breath_spec, rng);
    for (v, c) in ip.iter_mut().zip(&e.samples) {
        *v += 0.04 * (c - ecg_spec.offset_mv);
    }
    SignalRecord::new(subject_id, position, fs, e.samples, ip)
}
