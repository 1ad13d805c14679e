use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const STFT_WINDOW: usize = 64;
pub const STFT_OVERLAP: usize = 48;
pub const STFT_HOP: usize = STFT_WINDOW - STFT_OVERLAP;
pub const STFT_BINS: usize = STFT_WINDOW / 2 + 1;
pub const SPECTROGRAM_SIZE: usize = 64;

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Grayscale magnitude image, row = frequency bin, column = time frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub rows: usize,
    pub cols: usize,
    /// Row-major magnitudes.
    pub data: Vec<f64>,
}

impl Spectrogram {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// Hann-windowed frame magnitudes, `frames[f][k]` for the 33 one-sided bins.
/// Frames start every 16 samples and never run past the input.
pub fn stft_magnitudes(x: &[f64]) -> Result<Vec<Vec<f64>>> {
    if x.len() < STFT_WINDOW {
        return Err(Error::InvalidInput(format!(
            "signal of length {} is shorter than the {STFT_WINDOW}-sample window",
            x.len()
        )));
    }
    let window = hann(STFT_WINDOW);
    let plan = FftPlanner::new().plan_fft_forward(STFT_WINDOW);
    let n_frames = (x.len() - STFT_WINDOW) / STFT_HOP + 1;
    let mut frames = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); STFT_WINDOW];
    for f in 0..n_frames {
        let start = f * STFT_HOP;
        for (b, (v, w)) in buf.iter_mut().zip(x[start..start + STFT_WINDOW].iter().zip(&window)) {
            *b = Complex::new(v * w, 0.0);
        }
        plan.process(&mut buf);
        frames.push(buf[..STFT_BINS].iter().map(|c| c.norm()).collect());
    }
    Ok(frames)
}

/// Bilinear resize with corner-aligned sampling of a row-major `rows × cols` grid.
pub fn resize_bilinear(src: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_in == 1 || n_out == 1 {
            return (0, 0, 0.0);
        }
        let pos = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let lo = (pos.floor() as usize).min(n_in - 1);
        let hi = (lo + 1).min(n_in - 1);
        (lo, hi, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for r in 0..out_rows {
        let (r0, r1, fr) = coord(r, out_rows, rows);
        for c in 0..out_cols {
            let (c0, c1, fc) = coord(c, out_cols, cols);
            let top = src[r0 * cols + c0] * (1.0 - fc) + src[r0 * cols + c1] * fc;
            let bottom = src[r1 * cols + c0] * (1.0 - fc) + src[r1 * cols + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

/// 64×64 linear-magnitude spectrogram.
pub fn stft_spectrogram(x: &[f64]) -> Result<Spectrogram> {
    let frames = stft_magnitudes(x)?;
    let n_frames = frames.len();
    let mut grid = vec![0.0; STFT_BINS * n_frames];
    for (f, frame) in frames.iter().enumerate() {
        for (k, &m) in frame.iter().enumerate() {
            grid[k * n_frames + f] = m;
        }
    }
    let data = resize_bilinear(&grid, STFT_BINS, n_frames, SPECTROGRAM_SIZE, SPECTROGRAM_SIZE);
    Ok(Spectrogram {
        rows: SPECTROGRAM_SIZE,
        cols: SPECTROGRAM_SIZE,
        data,
    })
}
