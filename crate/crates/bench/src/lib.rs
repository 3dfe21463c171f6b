//! Deterministic inputs shared by the benchmarks.

use gw_gauss_core::GaussianMeasure;

/// Spectrum `scale * (1, 1/2, ..., 1/dim)`, already descending.
pub fn harmonic_spectrum(dim: usize, scale: f64) -> Vec<f64> {
    (1..=dim).map(|k| scale / k as f64).collect()
}

pub fn harmonic_measure(dim: usize, mass: f64, scale: f64) -> GaussianMeasure {
    GaussianMeasure::from_spectrum(mass, &harmonic_spectrum(dim, scale))
        .expect("harmonic spectra are positive")
}
