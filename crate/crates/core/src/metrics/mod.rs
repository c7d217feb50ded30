//! FID-proxy statistics and radial power spectra.

mod features;
mod fft;
mod fid;
mod linalg;
mod spectrum;

pub use features::{extract_features, FeatureExtractor};
pub use fft::{fft, power_2d};
pub use fid::{fid, fit_stats, FidReference, FidStats};
pub use linalg::{matrix_sqrt_psd, sym_eigen};
pub use spectrum::{
    azimuthal_average, high_band, luminance, power_spectrum_1d, spectrum_distance, Band, SpectrumProfile, LOG_EPS,
};
