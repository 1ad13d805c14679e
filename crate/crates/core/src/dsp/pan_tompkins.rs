//! QRS detection: band-pass, derivative, squaring, moving-window
//! integration, and adaptive dual-threshold peak picking.

use std::f64::consts::PI;

/// Second-order IIR section, direct form I.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Butterworth low-pass (Q = 1/√2), bilinear transform.
    fn lowpass(cutoff: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let c = w0.cos();
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(cutoff: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let c = w0.cos();
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// 5–15 Hz band-pass, forward only.
pub fn bandpass(x: &[f64], fs: f64) -> Vec<f64> {
    let hp = Biquad::highpass(5.0, fs).apply(x);
    Biquad::lowpass(15.0, fs).apply(&hp)
}

/// Five-point derivative `(2x[n] + x[n−1] − x[n−3] − 2x[n−4])·fs/8`.
fn derivative(x: &[f64], fs: f64) -> Vec<f64> {
    let at = |i: isize| if i < 0 { 0.0 } else { x[i as usize] };
    (0..x.len() as isize)
        .map(|n| (2.0 * at(n) + at(n - 1) - at(n - 3) - 2.0 * at(n - 4)) * fs / 8.0)
        .collect()
}

/// Causal moving average of width `w`.
fn moving_window(x: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i];
        if i >= w {
            acc -= x[i - w];
        }
        out.push(acc / w as f64);
    }
    out
}

fn argmax(x: &[f64], lo: usize, hi: usize) -> usize {
    (lo..hi).max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a))).unwrap_or(lo)
}

#[derive(Debug, Clone, Copy)]
struct Levels {
    signal: f64,
    noise: f64,
}

impl Levels {
    fn threshold1(&self) -> f64 {
        self.noise + 0.25 * (self.signal - self.noise)
    }
    fn threshold2(&self) -> f64 {
        0.5 * self.threshold1()
    }
}

/// Detects R-peaks and returns their sample indices in increasing order.
pub fn pan_tompkins_rpeaks(x: &[f64], fs: f64) -> Vec<usize> {
    if fs.is_nan() || fs <= 0.0 || x.len() < 8 {
        return Vec::new();
    }
    let bp = bandpass(x, fs);
    let sq: Vec<f64> = derivative(&bp, fs).into_iter().map(|v| v * v).collect();
    let win = ((0.150 * fs).round() as usize).max(1);
    let mwi = moving_window(&sq, win);
    let refractory = (0.200 * fs).round() as usize;
    let refine = ((0.050 * fs).round() as usize).max(1);

    let learn = ((2.0 * fs) as usize).min(mwi.len());
    let peak0 = mwi[..learn].iter().cloned().fold(0.0, f64::max);
    if peak0 <= 0.0 {
        return Vec::new();
    }
    let mut levels = Levels {
        signal: peak0 / 3.0,
        noise: mwi[..learn].iter().sum::<f64>() / learn as f64 / 2.0,
    };

    let candidates: Vec<usize> = (1..mwi.len() - 1)
        .filter(|&i| mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1])
        .collect();

    let mut qrs: Vec<usize> = Vec::new();
    let mut noise_since_qrs: Vec<usize> = Vec::new();
    let mut rr: Vec<usize> = Vec::new();

    for &p in &candidates {
        let v = mwi[p];
        // search back for a missed beat on a long RR gap
        if let Some(&last) = qrs.last() {
            if rr.len() >= 2 {
                let avg = rr.iter().sum::<usize>() as f64 / rr.len() as f64;
                if (p - last) as f64 > 1.66 * avg {
                    let best = noise_since_qrs
                        .iter()
                        .copied()
                        .filter(|&q| q >= last + refractory && p >= q + refractory)
                        .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                    if let Some(q) = best.filter(|&q| mwi[q] > levels.threshold2()) {
                        levels.signal = 0.25 * mwi[q] + 0.75 * levels.signal;
                        rr.push(q - last);
                        qrs.push(q);
                        noise_since_qrs.clear();
                    }
                }
            }
        }

        if v > levels.threshold1() {
            match qrs.last().copied() {
                Some(last) if p - last < refractory => {
                    if v > mwi[last] {
                        *qrs.last_mut().unwrap() = p;
                    }
                }
                last => {
                    if let Some(last) = last {
                        rr.push(p - last);
                        if rr.len() > 8 {
                            rr.remove(0);
                        }
                    }
                    qrs.push(p);
                    noise_since_qrs.clear();
                }
            }
            levels.signal = 0.125 * v + 0.875 * levels.signal;
        } else {
            levels.noise = 0.125 * v + 0.875 * levels.noise;
            noise_since_qrs.push(p);
        }
    }

    // The integrated peak trails the QRS: locate the band-passed maximum
    // inside the integration window, then the input maximum within ±50 ms.
    let mut peaks: Vec<usize> = Vec::with_capacity(qrs.len());
    for p in qrs {
        let lo = p.saturating_sub(win + 4);
        let b = argmax(&bp, lo, p + 1);
        let r = argmax(x, b.saturating_sub(refine), (b + refine + 1).min(x.len()));
        match peaks.last_mut() {
            Some(prev) if r < *prev + refractory => {
                if x[r] > x[*prev] {
                    *prev = r;
                }
            }
            _ => peaks.push(r),
        }
    }
    peaks
}
