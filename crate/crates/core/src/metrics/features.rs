//! Frozen image embeddings used for FID-proxy statistics.

use crate::autograd::Graph;
use crate::error::{contract_err, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureExtractor {
    /// Per-channel mean and variance followed by an 8×8 block-averaged copy
    /// of every channel.
    RawMoments,
    /// Frozen random 3×3 stride-2 conv stack with leaky relu; the global
    /// average of every layer is concatenated.
    RandomConv { seed: u64, depth: usize, width: usize },
}

impl FeatureExtractor {
    /// The extractor behind every FID-proxy number the harness reports.
    pub const DEFAULT: Self = Self::RandomConv { seed: 7, depth: 4, width: 64 };

    pub fn output_dim(&self, channels: usize) -> usize {
        match *self {
            Self::RawMoments => channels * (2 + 64),
            Self::RandomConv { depth, width, .. } => depth * width,
        }
    }
}

/// `[N, C, S, S]` images to `[N, D]` features, always in 64-bit.
pub fn extract_features<T: Scalar>(images: &Tensor<T>, fe: &FeatureExtractor) -> Result<Tensor<f64>> {
    let (n, c, h, w) = images.dims4()?;
    if n == 0 {
        return Err(contract_err!("feature extraction of an empty batch"));
    }
    let images: Tensor<f64> = images.cast();
    match *fe {
        FeatureExtractor::RawMoments => raw_moments(&images, n, c, h, w),
        FeatureExtractor::RandomConv { seed, depth, width } => {
            if h >> depth == 0 || w >> depth == 0 {
                return Err(contract_err!("{h}×{w} images are too small for a depth-{depth} stack"));
            }
            let kernels = random_kernels(seed, depth, width, c);
            let mut rows = Vec::with_capacity(n * depth * width);
            let mut start = 0;
            while start < n {
                let len = CHUNK.min(n - start);
                rows.extend(conv_features(&images.narrow_batch(start, len)?, &kernels)?);
                start += len;
            }
            Tensor::new(vec![n, depth * width], rows)
        }
    }
}

fn raw_moments(images: &Tensor<f64>, n: usize, c: usize, h: usize, w: usize) -> Result<Tensor<f64>> {
    if h < 8 || w < 8 {
        return Err(contract_err!("raw moments need images of at least 8×8, got {h}×{w}"));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(n * c * 66);
    for img in images.data().chunks(c * plane) {
        let mut blocks = Vec::with_capacity(c * 64);
        for ch in img.chunks(plane) {
            let mean = ch.iter().sum::<f64>() / plane as f64;
            let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / plane as f64;
            out.push(mean);
            out.push(var);
            for by in 0..8 {
                for bx in 0..8 {
                    let (y0, y1) = (by * h / 8, (by + 1) * h / 8);
                    let (x0, x1) = (bx * w / 8, (bx + 1) * w / 8);
                    let mut s = 0.0;
                    for y in y0..y1 {
                        s += ch[y * w + x0..y * w + x1].iter().sum::<f64>();
                    }
                    blocks.push(s / ((y1 - y0) * (x1 - x0)) as f64);
                }
            }
        }
        out.extend(blocks);
    }
    Tensor::new(vec![n, c * 66], out)
}

fn random_kernels(seed: u64, depth: usize, width: usize, channels: usize) -> Vec<Tensor<f64>> {
    let mut rng = Rng::new(seed);
    let mut cin = channels;
    (0..depth)
        .map(|_| {
            let std = (2.0 / (cin * 9) as f64).sqrt();
            let mut buf = vec![0.0; width * cin * 9];
            rng.fill_normal(&mut buf);
            let k = Tensor::new(vec![width, cin, 3, 3], buf.iter().map(|v| v * std).collect()).expect("sized above");
            cin = width;
            k
        })
        .collect()
}

fn conv_features(images: &Tensor<f64>, kernels: &[Tensor<f64>]) -> Result<Vec<f64>> {
    let n = images.shape()[0];
    let mut g = Graph::new().with_finite_checks(false);
    let mut x = g.constant(images.clone());
    let mut layers = Vec::with_capacity(kernels.len());
    for k in kernels {
        let kv = g.constant(k.clone());
        let y = g.conv2d(x, kv, None, 2, 1)?;
        x = g.leaky_relu(y, 0.2)?;
        layers.push(x);
    }
    let mut out = Vec::new();
    for i in 0..n {
        for &l in &layers {
            let t = g.value(l);
            let (_, c, h, w) = t.dims4()?;
            let plane = h * w;
            let img = &t.data()[i * c * plane..(i + 1) * c * plane];
            out.extend(img.chunks(plane).map(|p| p.iter().sum::<f64>() / plane as f64));
        }
    }
    Ok(out)
}
