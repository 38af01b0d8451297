//! Symmetric eigendecomposition via the cyclic Jacobi rotation method.

use super::{svd::needs_flip, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Result of [`sym_eig`]: `A = vectors * diag(values) * vectors^T`, values
/// in non-increasing order.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

pub fn sym_eig(a: &DenseMatrix) -> Result<SymEig> {
    if a.rows() != a.cols() {
        return Err(Error::invalid("sym_eig needs a square matrix"));
    }
    if !a.is_finite() {
        return Err(Error::invalid("sym_eig input contains non-finite entries"));
    }
    let scale = a.max_abs();
    if a.asymmetry() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "sym_eig input is not symmetric (max deviation {:.3e})",
            a.asymmetry()
        )));
    }

    let n = a.rows();
    let mut w = a.clone();
    // enforce exact symmetry so rotations stay consistent
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (w[(i, j)] + w[(j, i)]);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let mut v = DenseMatrix::identity(n);
    let frob = w.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += w[(i, j)] * w[(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= 1e-14 * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let diff = w[(q, q)] - w[(p, p)];
                let theta = diff / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                let app = w[(p, p)];
                let aqq = w[(q, q)];
                w[(p, p)] = app - t * apq;
                w[(q, q)] = aqq + t * apq;
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = w[(k, p)];
                        let akq = w[(k, q)];
                        let new_p = c * akp - s * akq;
                        let new_q = s * akp + c * akq;
                        w[(k, p)] = new_p;
                        w[(p, k)] = new_p;
                        w[(k, q)] = new_q;
                        w[(q, k)] = new_q;
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (slot, &j) in order.iter().enumerate() {
        let mut column: Vec<f64> = (0..n).map(|i| v[(i, j)]).collect();
        if needs_flip(&column) {
            for x in column.iter_mut() {
                *x = -*x;
            }
        }
        for i in 0..n {
            vectors[(i, slot)] = column[i];
        }
    }

    Ok(SymEig { values, vectors })
}

/// Inverse of a symmetric positive-definite matrix through its
/// eigendecomposition.
pub fn sym_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = sym_eig(a)?;
    let scale = eig.values.first().copied().unwrap_or(0.0).abs();
    if eig
        .values
        .iter()
        .any(|&l| l <= 1e-14 * scale.max(f64::MIN_POSITIVE))
    {
        return Err(Error::numerical(
            "sym_inverse: matrix is not numerically positive definite",
        ));
    }
    let n = a.rows();
    let mut scaled = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let inv = 1.0 / eig.values[j];
        for i in 0..n {
            scaled[(i, j)] = eig.vectors[(i, j)] * inv;
        }
    }
    Ok(scaled.matmul_a_bt(&eig.vectors))
}
