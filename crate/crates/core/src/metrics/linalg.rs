//! Dense symmetric eigensolver (cyclic Jacobi) and PSD square roots.
//! Matrices are row-major `n×n` slices.

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Tolerance for treating small negative eigenvalues as zero, relative to
/// `max(1, largest |eigenvalue|)`.
pub const NEG_EIG_TOL: f64 = 1e-8;

fn check_square(a: &[f64], n: usize) -> Result<()> {
    if a.len() != n * n {
        return Err(Error::Contract(format!("matrix of {} values is not {n}×{n}", a.len())));
    }
    Ok(())
}

/// Largest absolute asymmetry `|a_ij - a_ji|` relative to `max(1, max |a|)`.
pub fn asymmetry(a: &[f64], n: usize) -> f64 {
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[i * n + j] - a[j * n + i]).abs());
        }
    }
    worst / scale
}

/// Eigenvalues and (optionally) column eigenvectors of a symmetric matrix.
pub fn sym_eigen(a: &[f64], n: usize, vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    check_square(a, n)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigendecomposition of a non-finite matrix".into()));
    }
    let mut m = a.to_vec();
    // Symmetrize so rounding-level asymmetry does not leak into the rotations.
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }
    let mut v = vectors.then(|| {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        id
    });
    let frob2: f64 = m.iter().map(|x| x * x).sum();
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i * n + j].powi(2)).sum();
        if off <= f64::EPSILON.powi(2) * frob2 || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[p * n + p], m[q * n + q]);
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * kp - s * kq;
                    m[k * n + q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * pk - s * qk;
                    m[q * n + k] = s * pk + c * qk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let (kp, kq) = (v[k * n + p], v[k * n + q]);
                        v[k * n + p] = c * kp - s * kq;
                        v[k * n + q] = s * kp + c * kq;
                    }
                }
            }
        }
    }
    if !converged {
        return Err(Error::Numeric(format!("Jacobi eigensolver did not converge for a {n}×{n} matrix")));
    }
    Ok(((0..n).map(|i| m[i * n + i]).collect(), v))
}

/// Clips eigenvalues in `[-tol, 0)` to zero and rejects anything below.
pub fn clip_psd(eig: &mut [f64]) -> Result<()> {
    let scale = eig.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for e in eig.iter_mut() {
        if *e < -NEG_EIG_TOL * scale {
            return Err(Error::Numeric(format!("matrix is indefinite: eigenvalue {e:e}")));
        }
        *e = e.max(0.0);
    }
    Ok(())
}

/// Principal square root `R` of a symmetric PSD matrix, `R·R = A`.
pub fn matrix_sqrt_psd(a: &[f64], n: usize) -> Result<Vec<f64>> {
    check_square(a, n)?;
    let asym = asymmetry(a, n);
    if asym > 1e-10 {
        return Err(Error::Numeric(format!("matrix is not symmetric (relative asymmetry {asym:e})")));
    }
    let (mut eig, v) = sym_eigen(a, n, true)?;
    clip_psd(&mut eig)?;
    let v = v.expect("requested");
    let roots: Vec<f64> = eig.iter().map(|e| e.sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| v[i * n + k] * roots[k] * v[j * n + k]).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    Ok(out)
}

/// `A·B` for row-major `n×n` matrices.
pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    use crate::scalar::Scalar;
    let mut c = vec![0.0; n * n];
    f64::gemm(n, n, n, a, (n as isize, 1), b, (n as isize, 1), &mut c, (n as isize, 1), false);
    c
}
