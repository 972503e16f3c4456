//! Impedance-pneumography front end: adaptive removal of the cardiac
//! component, smoothing, and breath delimitation on the flow surrogate.

use crate::dsp::{highpass_zero_phase, moving_average_reflect};
use crate::error::{check_finite, Error, Result};
use crate::record_io::MIN_RECORD_SECONDS;

/// Adaptive filter length in seconds (50 taps at 250 Hz).
pub const LMS_TAPS_S: f64 = 0.2;
pub const LMS_STEP: f64 = 0.05;
/// Corner of the high-pass applied to both channels before adaptation, so
/// the filter sees the cardiac band and not breathing or offsets.
pub const LMS_HIGHPASS_HZ: f64 = 0.6;
pub const SMOOTHING_S: f64 = 0.4;

pub const HYSTERESIS_FACTOR: f64 = 0.2;
pub const HYSTERESIS_WINDOW_S: f64 = 10.0;
pub const MIN_INS_T_S: f64 = 0.5;
pub const MIN_RELATIVE_AMPLITUDE: f64 = 0.1;
/// Breaths in the running-median window for the amplitude rule.
pub const AMPLITUDE_MEDIAN_BREATHS: usize = 11;
pub const MIN_BREATHS: usize = 3;

/// Delimited breaths. Breath `i` runs from `insp_onsets_s[i]` through
/// `exp_onsets_s[i]` to `insp_onsets_s[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BreathSeries {
    pub insp_onsets_s: Vec<f64>,
    pub exp_onsets_s: Vec<f64>,
    pub ins_t_s: Vec<f64>,
    pub exp_t_s: Vec<f64>,
    pub ins_v: Vec<f64>,
    pub exp_v: Vec<f64>,
    pub i_rr_s: Vec<f64>,
}

impl BreathSeries {
    pub fn len(&self) -> usize {
        self.ins_t_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ins_t_s.is_empty()
    }
}

/// Normalized LMS cancellation of the ECG-correlated component followed by
/// a centered moving average of `round(0.4 · fs)` samples.
pub fn remove_cardiac_component(ip: &[f64], ecg: &[f64], sample_rate_hz: f64) -> Result<Vec<f64>> {
    let fs = sample_rate_hz;
    if !(fs > 0.0) {
        return Err(Error::SampleRate(fs));
    }
    if ip.len() != ecg.len() {
        return Err(Error::LengthMismatch {
            ecg: ecg.len(),
            ip: ip.len(),
        });
    }
    if (ip.len() as f64) < MIN_RECORD_SECONDS * fs {
        return Err(Error::TooShort(format!("{} impedance samples", ip.len())));
    }
    check_finite(ip, "ip")?;
    check_finite(ecg, "ecg")?;

    let target = highpass_zero_phase(ip, LMS_HIGHPASS_HZ, fs);
    let reference = highpass_zero_phase(ecg, LMS_HIGHPASS_HZ, fs);
    let taps = ((LMS_TAPS_S * fs).round() as usize).max(1);
    let mut w = vec![0.0; taps];
    let mut energy = 0.0;
    let mut cleaned = Vec::with_capacity(ip.len());
    for i in 0..ip.len() {
        energy += reference[i] * reference[i];
        if i >= taps {
            energy -= reference[i - taps] * reference[i - taps];
        }
        let window = |k: usize| if i >= k { reference[i - k] } else { 0.0 };
        let estimate: f64 = (0..taps).map(|k| w[k] * window(k)).sum();
        let err = target[i] - estimate;
        if energy > 0.0 {
            let g = LMS_STEP * err / (energy + 1e-12 * taps as f64);
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += g * window(k);
            }
        }
        cleaned.push(ip[i] - estimate);
    }
    Ok(moving_average_reflect(&cleaned, (SMOOTHING_S * fs).round() as usize))
}

fn rolling_std(x: &[f64], width: usize) -> Vec<f64> {
    let m = moving_average_reflect(x, width);
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let m2 = moving_average_reflect(&sq, width);
    m.iter().zip(&m2).map(|(a, b)| (b - a * a).max(0.0).sqrt()).collect()
}

/// Alternating trough/peak sample indices found by hysteresis on the
/// derivative. The extremum in progress at either end of the record is
/// dropped.
fn extrema(x: &[f64], fs: f64) -> Vec<usize> {
    let n = x.len();
    let mut d = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        d[i] = (x[i + 1] - x[i - 1]) * fs / 2.0;
    }
    let h: Vec<f64> = rolling_std(&d, (HYSTERESIS_WINDOW_S * fs).round() as usize)
        .into_iter()
        .map(|s| HYSTERESIS_FACTOR * s)
        .collect();

    #[derive(PartialEq)]
    enum State {
        Start,
        Rising,
        Falling,
    }
    let mut state = State::Start;
    let mut out = Vec::new();
    let (mut imin, mut imax) = (0, 0);
    for i in 0..n {
        if x[i] < x[imin] {
            imin = i;
        }
        if x[i] > x[imax] {
            imax = i;
        }
        if state != State::Rising && d[i] > h[i] && h[i] > 0.0 {
            if state == State::Falling {
                out.push(imin);
            }
            state = State::Rising;
            imax = i;
        } else if state != State::Falling && d[i] < -h[i] && h[i] > 0.0 {
            if state == State::Rising {
                out.push(imax);
            }
            state = State::Falling;
            imin = i;
        }
    }
    out
}

/// Index of the first breath breaking the InsT or amplitude rule, choosing
/// the smallest-amplitude offender.
fn worst_breath(x: &[f64], ext: &[usize], fs: f64) -> Option<usize> {
    let breaths = (ext.len() - 1) / 2;
    let amp: Vec<f64> = (0..breaths)
        .map(|b| {
            let (t0, p, t1) = (ext[2 * b], ext[2 * b + 1], ext[2 * b + 2]);
            (x[p] - x[t0]).min(x[p] - x[t1])
        })
        .collect();
    let half = AMPLITUDE_MEDIAN_BREATHS / 2;
    (0..breaths)
        .filter(|&b| {
            let ins_t = (ext[2 * b + 1] - ext[2 * b]) as f64 / fs;
            let lo = b.saturating_sub(half);
            let hi = (b + half + 1).min(breaths);
            let med = crate::stats::median(&mut amp[lo..hi].to_vec());
            ins_t < MIN_INS_T_S || amp[b] < MIN_RELATIVE_AMPLITUDE * med
        })
        .min_by(|&a, &b| amp[a].total_cmp(&amp[b]).then(a.cmp(&b)))
}

/// Segments a cleaned impedance trace into breaths. Inspiration is a
/// rising segment of the flow surrogate (the central-difference
/// derivative), confirmed when the derivative crosses ±0.2 times its 10 s
/// rolling standard deviation. Breaths with InsT < 0.5 s or with an
/// amplitude (the smaller of InsV and ExpV) under 10% of the running median
/// are merged into their neighbours by removing the peak and the higher of
/// the two troughs.
pub fn delimit_breaths(ip_clean: &[f64], sample_rate_hz: f64) -> Result<BreathSeries> {
    let fs = sample_rate_hz;
    if !(fs > 0.0) {
        return Err(Error::SampleRate(fs));
    }
    if (ip_clean.len() as f64) < MIN_RECORD_SECONDS * fs {
        return Err(Error::TooShort(format!("{} impedance samples", ip_clean.len())));
    }
    check_finite(ip_clean, "ip")?;
    let x = ip_clean;
    let mut ext = extrema(x, fs);
    // start and end on a trough
    if ext.len() >= 2 && x[ext[0]] > x[ext[1]] {
        ext.remove(0);
    }
    if ext.len() % 2 == 0 {
        ext.pop();
    }
    while ext.len() >= 3 {
        let Some(b) = worst_breath(x, &ext, fs) else { break };
        // drop the peak together with the higher of its two troughs
        if x[ext[2 * b]] <= x[ext[2 * b + 2]] {
            ext.drain(2 * b + 1..=2 * b + 2);
        } else {
            ext.drain(2 * b..=2 * b + 1);
        }
    }
    let breaths = ext.len().saturating_sub(1) / 2;
    if breaths < MIN_BREATHS {
        return Err(Error::TooFew {
            what: "complete breaths",
            needed: MIN_BREATHS,
            got: breaths,
        });
    }
    let t = |i: usize| i as f64 / fs;
    let troughs: Vec<usize> = ext.iter().step_by(2).copied().collect();
    let peaks: Vec<usize> = ext.iter().skip(1).step_by(2).copied().collect();
    Ok(BreathSeries {
        insp_onsets_s: troughs.iter().map(|&i| t(i)).collect(),
        exp_onsets_s: peaks.iter().map(|&i| t(i)).collect(),
        ins_t_s: (0..breaths).map(|b| t(peaks[b]) - t(troughs[b])).collect(),
        exp_t_s: (0..breaths).map(|b| t(troughs[b + 1]) - t(peaks[b])).collect(),
        ins_v: (0..breaths).map(|b| x[peaks[b]] - x[troughs[b]]).collect(),
        exp_v: (0..breaths).map(|b| x[peaks[b]] - x[troughs[b + 1]]).collect(),
        i_rr_s: (0..breaths).map(|b| t(troughs[b + 1]) - t(troughs[b])).collect(),
    })
}
