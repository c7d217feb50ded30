//! In-place iterative radix-2 FFT over split real/imaginary buffers.

use std::f64::consts::PI;

use crate::error::{contract_err, Result};

/// Forward DFT `X[k] = Σ x[n]·exp(-2πi·kn/N)` of a power-of-two length signal.
pub fn fft(re: &mut [f64], im: &mut [f64]) -> Result<()> {
    let n = re.len();
    if im.len() != n {
        return Err(contract_err!("fft buffers differ in length: {} vs {}", n, im.len()));
    }
    if !n.is_power_of_two() {
        return Err(contract_err!("fft length must be a power of two, got {n}"));
    }
    let bits = n.trailing_zeros();
    if bits == 0 {
        return Ok(());
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let (s, c) = (ang * k as f64).sin_cos();
                let (a, b) = (start + k, start + k + half);
                let tr = re[b] * c - im[b] * s;
                let ti = re[b] * s + im[b] * c;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// Unnormalized `|DFT|²` of a real `size×size` image stored row-major.
pub fn power_2d(image: &[f64], size: usize) -> Result<Vec<f64>> {
    if image.len() != size * size {
        return Err(contract_err!("image of {} values is not {size}×{size}", image.len()));
    }
    let mut re = image.to_vec();
    let mut im = vec![0.0; size * size];
    for row in 0..size {
        let r = row * size..(row + 1) * size;
        fft(&mut re[r.clone()], &mut im[r])?;
    }
    let (mut cr, mut ci) = (vec![0.0; size], vec![0.0; size]);
    for col in 0..size {
        for row in 0..size {
            cr[row] = re[row * size + col];
            ci[row] = im[row * size + col];
        }
        fft(&mut cr, &mut ci)?;
        for row in 0..size {
            re[row * size + col] = cr[row];
            im[row * size + col] = ci[row];
        }
    }
    Ok(re.iter().zip(&im).map(|(a, b)| a * a + b * b).collect())
}
