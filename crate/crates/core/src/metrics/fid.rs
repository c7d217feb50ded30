//! Gaussian feature statistics and the Fréchet distance between them.

use super::linalg::{clip_psd, matmul, matrix_sqrt_psd, sym_eigen};
use crate::error::{contract_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct FidStats {
    pub mu: Vec<f64>,
    /// Row-major `dim×dim` unbiased covariance.
    pub sigma: Vec<f64>,
    pub n: usize,
}

impl FidStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Column means and unbiased covariance of `[N, D]` features (two-pass).
pub fn fit_stats(features: &Tensor<f64>) -> Result<FidStats> {
    let (n, d) = match features.shape() {
        &[n, d] => (n, d),
        s => return Err(contract_err!("features must be [N, D], got {s:?}")),
    };
    if n < 2 {
        return Err(contract_err!("covariance needs at least 2 samples, got {n}"));
    }
    let x = features.data();
    let mut mu = vec![0.0; d];
    for row in x.chunks(d) {
        for (m, v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<f64> = x.chunks(d).flat_map(|row| row.iter().zip(&mu).map(|(v, m)| v - m)).collect();
    let mut sigma = vec![0.0; d * d];
    // Xcᵀ·Xc through a transposed view of the centered rows.
    f64::gemm(d, n, d, &centered, (1, d as isize), &centered, (d as isize, 1), &mut sigma, (d as isize, 1), false);
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let s = 0.5 * (sigma[i * d + j] + sigma[j * d + i]) / denom;
            sigma[i * d + j] = s;
            sigma[j * d + i] = s;
        }
    }
    Ok(FidStats { mu, sigma, n })
}

/// Statistics of a fixed reference set, with `Σ^{1/2}` computed once.
#[derive(Clone, Debug)]
pub struct FidReference {
    pub stats: FidStats,
    sqrt_sigma: Vec<f64>,
}

impl FidReference {
    pub fn new(stats: FidStats) -> Result<Self> {
        let sqrt_sigma = matrix_sqrt_psd(&stats.sigma, stats.dim())?;
        Ok(Self { stats, sqrt_sigma })
    }

    /// `‖μa−μb‖² + Tr(Σa + Σb − 2(Σa^{1/2} Σb Σa^{1/2})^{1/2})`, clamped at 0.
    pub fn distance(&self, other: &FidStats) -> Result<f64> {
        let d = self.stats.dim();
        if other.dim() != d {
            return Err(contract_err!("FID between {d}- and {}-dimensional statistics", other.dim()));
        }
        let mean: f64 = self.stats.mu.iter().zip(&other.mu).map(|(a, b)| (a - b) * (a - b)).sum();
        let trace = |m: &[f64]| (0..d).map(|i| m[i * d + i]).sum::<f64>();
        let inner = matmul(&matmul(&self.sqrt_sigma, &other.sigma, d), &self.sqrt_sigma, d);
        let (mut eig, _) = sym_eigen(&inner, d, false)?;
        clip_psd(&mut eig)?;
        let cross: f64 = eig.iter().map(|e| e.sqrt()).sum();
        let value = mean + trace(&self.stats.sigma) + trace(&other.sigma) - 2.0 * cross;
        Ok(value.max(0.0))
    }
}

pub fn fid(a: &FidStats, b: &FidStats) -> Result<f64> {
    FidReference::new(a.clone())?.distance(b)
}
