//! Naive reference implementations used as test oracles.

use crate::rng::Rng;
use crate::tensor::Tensor;

pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut r = Rng::new(seed);
    Tensor::from_fn(shape.to_vec(), |_| r.uniform_range(-1.0, 1.0))
}

/// Direct-summation cross-correlation.
pub fn conv_oracle(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let (n, cin, h, w) = x.dims4().unwrap();
    let (cout, _, kh, kw) = k.dims4().unwrap();
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let mut out = Tensor::zeros(vec![n, cout, ho, wo]);
    for b in 0..n {
        for co in 0..cout {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..cin {
                        for i in 0..kh {
                            for j in 0..kw {
                                let iy = (oy * stride + i) as isize - pad as isize;
                                let ix = (ox * stride + j) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += x.data()[((b * cin + ci) * h + iy as usize) * w + ix as usize]
                                    * k.data()[((co * cin + ci) * kh + i) * kw + j];
                            }
                        }
                    }
                    out.data_mut()[((b * cout + co) * ho + oy) * wo + ox] = acc;
                }
            }
        }
    }
    out
}


pub fn conv_transpose_oracle(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let (n, cin, h, w) = x.dims4().unwrap();
    let (_, cout, kh, kw) = k.dims4().unwrap();
    let ho = (h - 1) * stride + kh - 2 * pad;
    let wo = (w - 1) * stride + kw - 2 * pad;
    let mut out = Tensor::zeros(vec![n, cout, ho, wo]);
    for b in 0..n {
        for ci in 0..cin {
            for co in 0..cout {
                for y in 0..h {
                    for xx in 0..w {
                        for i in 0..kh {
                            for j in 0..kw {
                                let oy = (y * stride + i) as isize - pad as isize;
                                let ox = (xx * stride + j) as isize - pad as isize;
                                if oy < 0 || ox < 0 || oy >= ho as isize || ox >= wo as isize {
                                    continue;
                                }
                                out.data_mut()[((b * cout + co) * ho + oy as usize) * wo + ox as usize] +=
                                    x.data()[((b * cin + ci) * h + y) * w + xx] * k.data()[((ci * cout + co) * kh + i) * kw + j];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn pool_oracle(x: &Tensor<f64>, k: usize) -> Tensor<f64> {
    let (n, c, h, w) = x.dims4().unwrap();
    let (ho, wo) = (h / k, w / k);
    Tensor::from_fn(vec![n, c, ho, wo], |i| {
        let (p, oy, ox) = (i / (ho * wo), (i / wo) % ho, i % wo);
        let mut acc = 0.0;
        for dy in 0..k {
            for dx in 0..k {
                acc += x.data()[p * h * w + (oy * k + dy) * w + ox * k + dx];
            }
        }
        acc / (k * k) as f64
    })
}

pub fn upsample_oracle(x: &Tensor<f64>, k: usize) -> Tensor<f64> {
    let (n, c, h, w) = x.dims4().unwrap();
    let (ho, wo) = (h * k, w * k);
    Tensor::from_fn(vec![n, c, ho, wo], |i| {
        let (p, y, xx) = (i / (ho * wo), (i / wo) % ho, i % wo);
        x.data()[p * h * w + (y / k) * w + xx / k]
    })
}

pub fn add_oracle(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    assert_eq!(a.shape(), b.shape());
    Tensor::from_fn(a.shape().to_vec(), |i| a.data()[i] + b.data()[i])
}
