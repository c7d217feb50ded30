use crate::error::{contract_err, dim_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Per-channel running mean and (unbiased) variance.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Scalar> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self { mean: vec![T::zero(); channels], var: vec![T::one(); channels] }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug)]
pub(crate) struct BnSaved<T> {
    mean: Vec<T>,
    inv_std: Vec<T>,
    train: bool,
}

pub(crate) fn forward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running: &mut RunningStats<T>,
    mode: BnMode,
    momentum: T,
    eps: T,
) -> Result<(Tensor<T>, BnSaved<T>)> {
    let (n, c, h, w) = x.dims4()?;
    if gamma.shape() != [c] || beta.shape() != [c] || running.channels() != c {
        return Err(dim_err!(
            "batch norm over {c} channels got gamma {:?}, beta {:?}, running {}",
            gamma.shape(),
            beta.shape(),
            running.channels()
        ));
    }
    let plane = h * w;
    let count = n * plane;
    let xd = x.data();
    let (mean, inv_std) = match mode {
        BnMode::Train => {
            if count < 2 {
                return Err(Error::Numeric(format!(
                    "degenerate batch statistics: {count} value(s) per channel in train mode"
                )));
            }
            let cnt = T::lit(count as f64);
            let mut mean = vec![T::zero(); c];
            let mut var = vec![T::zero(); c];
            for ch in 0..c {
                let mut s = T::zero();
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    s = s + xd[base..base + plane].iter().copied().sum();
                }
                let m = s / cnt;
                let mut sq = T::zero();
                for b in 0..n {
                    let base = (b * c + ch) * plane;
                    sq = sq + xd[base..base + plane].iter().map(|&v| (v - m) * (v - m)).sum();
                }
                mean[ch] = m;
                var[ch] = sq / cnt;
            }
            let unbias = cnt / T::lit((count - 1) as f64);
            for ch in 0..c {
                running.mean[ch] = (T::one() - momentum) * running.mean[ch] + momentum * mean[ch];
                running.var[ch] = (T::one() - momentum) * running.var[ch] + momentum * var[ch] * unbias;
            }
            let inv: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
            (mean, inv)
        }
        BnMode::Eval => {
            let inv: Vec<T> = running.var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
            (running.mean.clone(), inv)
        }
    };
    if eps < T::zero() {
        return Err(contract_err!("batch norm eps must be non-negative"));
    }
    let (gd, bd) = (gamma.data(), beta.data());
    let mut out = vec![T::zero(); xd.len()];
    for b in 0..n {
        for ch in 0..c {
            let base = (b * c + ch) * plane;
            let scale = gd[ch] * inv_std[ch];
            for i in base..base + plane {
                out[i] = (xd[i] - mean[ch]) * scale + bd[ch];
            }
        }
    }
    let saved = BnSaved { mean, inv_std, train: mode == BnMode::Train };
    Ok((Tensor::new(x.shape().to_vec(), out)?, saved))
}

/// Returns gradients for `(x, gamma, beta)`.
pub(crate) fn backward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    saved: &BnSaved<T>,
    g: &Tensor<T>,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (n, c, h, w) = x.dims4()?;
    let plane = h * w;
    let cnt = T::lit((n * plane) as f64);
    let (xd, gd, gam) = (x.data(), g.data(), gamma.data());
    let mut gx = vec![T::zero(); xd.len()];
    let mut ggamma = vec![T::zero(); c];
    let mut gbeta = vec![T::zero(); c];
    for ch in 0..c {
        let (m, inv) = (saved.mean[ch], saved.inv_std[ch]);
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        for b in 0..n {
            let base = (b * c + ch) * plane;
            for i in base..base + plane {
                sum_g = sum_g + gd[i];
                sum_gx = sum_gx + gd[i] * (xd[i] - m) * inv;
            }
        }
        ggamma[ch] = sum_gx;
        gbeta[ch] = sum_g;
        let k = gam[ch] * inv;
        for b in 0..n {
            let base = (b * c + ch) * plane;
            for i in base..base + plane {
                gx[i] = if saved.train {
                    let xhat = (xd[i] - m) * inv;
                    k * (gd[i] - sum_g / cnt - xhat * sum_gx / cnt)
                } else {
                    k * gd[i]
                };
            }
        }
    }
    Ok((gx, ggamma, gbeta))
}
