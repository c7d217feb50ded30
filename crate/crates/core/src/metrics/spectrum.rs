//! Azimuthally averaged power spectra and band distances.

use super::fft::power_2d;
use crate::error::{contract_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Added to powers before taking logs.
pub const LOG_EPS: f64 = 1e-12;

/// Mean power per integer radius `0..=S/2`, averaged over a set of images.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumProfile {
    pub size: usize,
    pub power: Vec<f64>,
}

impl SpectrumProfile {
    pub fn bins(&self) -> usize {
        self.power.len()
    }

    /// Mean power over the high band.
    pub fn high_band_power(&self) -> f64 {
        let r = high_band(self.size);
        self.power[r.clone()].iter().sum::<f64>() / r.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Band {
    High,
    Full,
}

/// Radii strictly above three quarters of the Nyquist radius.
pub fn high_band(size: usize) -> std::ops::Range<usize> {
    let nyq = size / 2;
    (nyq * 3 / 4 + 1).min(nyq)..nyq + 1
}

/// Rec. 601 luma of an RGB image, or the single plane as is.
pub fn luminance<T: Scalar>(images: &Tensor<T>, index: usize) -> Result<Vec<f64>> {
    let (_, c, h, w) = images.dims4()?;
    let plane = h * w;
    let base = index * c * plane;
    let px = |ch: usize, i: usize| images.data()[base + ch * plane + i].as_f64();
    match c {
        1 => Ok((0..plane).map(|i| px(0, i)).collect()),
        3 => Ok((0..plane).map(|i| 0.299 * px(0, i) + 0.587 * px(1, i) + 0.114 * px(2, i)).collect()),
        _ => Err(contract_err!("spectrum expects 1 or 3 channels, got {c}")),
    }
}

/// Radial bin of every DFT coefficient, `None` for corners past `S/2`.
fn radial_bins(size: usize) -> Vec<Option<usize>> {
    let signed = |k: usize| if k <= size / 2 { k as f64 } else { k as f64 - size as f64 };
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let r = signed(x).hypot(signed(y)).round() as usize;
            out.push((r <= size / 2).then_some(r));
        }
    }
    out
}

/// Bins an unnormalized 2D power array by integer radius and averages.
pub fn azimuthal_average(power: &[f64], size: usize) -> Vec<f64> {
    let mut sum = vec![0.0; size / 2 + 1];
    let mut count = vec![0usize; size / 2 + 1];
    for (p, bin) in power.iter().zip(radial_bins(size)) {
        if let Some(b) = bin {
            sum[b] += p;
            count[b] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 }).collect()
}

/// Profile of `[N, 1|3, S, S]` images, scaled so a unit-constant image has
/// bin 0 equal to 1.
pub fn power_spectrum_1d<T: Scalar>(images: &Tensor<T>) -> Result<SpectrumProfile> {
    let (n, _, h, w) = images.dims4()?;
    if h != w || h < 4 || !h.is_power_of_two() {
        return Err(contract_err!("spectrum needs square power-of-two images of side >= 4, got {h}×{w}"));
    }
    if n == 0 {
        return Err(contract_err!("spectrum of an empty batch"));
    }
    let norm = ((h * h) as f64).powi(2);
    let mut acc = vec![0.0; h / 2 + 1];
    for i in 0..n {
        let power = power_2d(&luminance(images, i)?, h)?;
        for (a, p) in acc.iter_mut().zip(azimuthal_average(&power, h)) {
            *a += p;
        }
    }
    let power = acc.iter().map(|a| a / (n as f64 * norm)).collect();
    Ok(SpectrumProfile { size: h, power })
}

/// Mean absolute log-power difference over `band`.
pub fn spectrum_distance(gen: &SpectrumProfile, real: &SpectrumProfile, band: Band) -> Result<f64> {
    if gen.size != real.size || gen.bins() != real.bins() {
        return Err(contract_err!("spectra of sizes {} and {} are not comparable", gen.size, real.size));
    }
    let range = match band {
        Band::High => high_band(gen.size),
        Band::Full => 0..gen.bins(),
    };
    let len = range.len() as f64;
    let total: f64 = range.map(|i| ((gen.power[i] + LOG_EPS).ln() - (real.power[i] + LOG_EPS).ln()).abs()).sum();
    Ok(total / len)
}
