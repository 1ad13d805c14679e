use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// One-sided spectrum of a real sequence: bins `0..=n/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
    /// Length of the transformed sequence.
    pub n: usize,
}

impl ComplexSpectrum {
    /// Time-domain energy recovered from the one-sided bins (Parseval).
    pub fn energy(&self) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for k in 0..self.real.len() {
            let p = self.real[k].powi(2) + self.imag[k].powi(2);
            let mirrored = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            total += if mirrored { 2.0 * p } else { p };
        }
        total / n as f64
    }
}

/// Reusable forward transform for a fixed length.
#[derive(Clone)]
pub struct RealFft {
    n: usize,
    plan: Arc<dyn Fft<f64>>,
}

impl RealFft {
    pub fn new(n: usize) -> Self {
        let plan = FftPlanner::new().plan_fft_forward(n.max(1));
        Self { n, plan }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Bin `k = 0..=n/2` of `Σ_t x[t]·exp(−2πi·kt/n)`.
    pub fn transform(&self, x: &[f64]) -> ComplexSpectrum {
        assert_eq!(x.len(), self.n, "RealFft planned for length {}", self.n);
        if self.n == 0 {
            return ComplexSpectrum { real: Vec::new(), imag: Vec::new(), n: 0 };
        }
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.plan.process(&mut buf);
        let bins = self.n / 2 + 1;
        let real: Vec<f64> = buf[..bins].iter().map(|c| c.re).collect();
        let mut imag: Vec<f64> = buf[..bins].iter().map(|c| c.im).collect();
        // exact zeros where real-input symmetry forces them
        imag[0] = 0.0;
        if self.n.is_multiple_of(2) {
            imag[bins - 1] = 0.0;
        }
        ComplexSpectrum { real, imag, n: self.n }
    }
}

pub fn fft_real_imag(x: &[f64]) -> ComplexSpectrum {
    RealFft::new(x.len()).transform(x)
}
