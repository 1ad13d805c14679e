//! Signal-processing primitives used by the segmentation pipelines and the
//! frequency-domain model inputs.

mod fft;
mod normalize;
mod pan_tompkins;
mod savgol;
mod stft;

pub use fft::{fft_real_imag, ComplexSpectrum, RealFft};
pub use normalize::{mean, mean_subtract, population_std, zscore};
pub use pan_tompkins::{bandpass, pan_tompkins_rpeaks};
pub use savgol::{savgol_weights, savitzky_golay};
pub use stft::{
    hann, resize_bilinear, stft_magnitudes, stft_spectrogram, Spectrogram, SPECTROGRAM_SIZE, STFT_BINS, STFT_HOP,
    STFT_OVERLAP, STFT_WINDOW,
};
