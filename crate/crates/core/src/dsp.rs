//! Offline filter primitives shared by the ECG and impedance front ends.
//! All filters here are zero-phase.

/// Largest odd integer not above `x` (at least 1).
pub fn odd_len(x: f64) -> usize {
    let n = x.floor().max(1.0) as usize;
    if n % 2 == 0 {
        n - 1
    } else {
        n
    }
}

/// Odd window length closest to `seconds` at `fs`.
pub fn odd_window(seconds: f64, fs: f64) -> usize {
    2 * (seconds * fs / 2.0).round() as usize + 1
}

/// Centered moving average of odd width, treating samples outside the
/// signal as zero.
pub fn moving_average_zero(x: &[f64], width: usize) -> Vec<f64> {
    debug_assert!(width % 2 == 1);
    let n = x.len();
    let half = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / width as f64
        })
        .collect()
}

/// Index into `0..n` after mirror reflection about the end samples.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    j as usize
}

/// Moving average of any width over `[i - width/2, i - width/2 + width)`,
/// with the signal extended by reflection at both ends.
pub fn moving_average_reflect(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 || width <= 1 {
        return x.to_vec();
    }
    let start = -((width / 2) as isize);
    let window_sum = |i: isize| -> f64 { (0..width as isize).map(|k| x[reflect(i + start + k, n)]).sum() };
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n as isize {
        // re-anchor the running sum periodically to bound rounding drift
        if i % 4096 == 0 {
            acc = window_sum(i);
        } else {
            acc += x[reflect(i + start + width as isize - 1, n)] - x[reflect(i + start - 1, n)];
        }
        out.push(acc / width as f64);
    }
    out
}

/// Running median over a centered odd window with reflected edges.
pub fn median_filter(x: &[f64], width: usize) -> Vec<f64> {
    debug_assert!(width % 2 == 1);
    let n = x.len();
    let half = (width / 2) as isize;
    let mut buf = vec![0.0; width];
    (0..n as isize)
        .map(|i| {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = x[reflect(i - half + k as isize, n)];
            }
            let (_, m, _) = buf.select_nth_unstable_by(width / 2, |a, b| a.total_cmp(b));
            *m
        })
        .collect()
}

/// Second-order Butterworth high-pass section (bilinear transform).
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn highpass(cutoff_hz: f64, fs: f64) -> Self {
        let k = (std::f64::consts::PI * cutoff_hz / fs).tan();
        let q = std::f64::consts::FRAC_1_SQRT_2;
        let norm = 1.0 / (1.0 + k / q + k * k);
        Biquad {
            b: [norm, -2.0 * norm, norm],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = self.b[0] * v + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
                x2 = x1;
                x1 = v;
                y2 = y1;
                y1 = y;
                y
            })
            .collect()
    }
}

/// Zero-phase fourth-order high-pass: two Butterworth sections run forward
/// and backward over a reflection-padded copy.
pub fn highpass_zero_phase(x: &[f64], cutoff_hz: f64, fs: f64) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let pad = ((3.0 * fs / cutoff_hz) as usize).min(n - 1);
    // odd extension keeps the padded signal continuous in value and slope
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));
    let section = Biquad::highpass(cutoff_hz, fs);
    let mut y = section.run(&section.run(&ext));
    y.reverse();
    let mut y = section.run(&section.run(&y));
    y.reverse();
    y[pad..pad + n].to_vec()
}
