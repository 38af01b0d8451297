//! Singular value decomposition via one-sided Jacobi rotations.
//!
//! The accuracy contract is what matters here: `||A - U S V^T||_F <=
//! 1e-9 * (1 + ||A||_F)`, orthonormal vector blocks to 1e-10, singular
//! values non-increasing. One-sided Jacobi delivers that comfortably for
//! the matrix sizes this crate works with (the long dimension may be large,
//! the short one stays in the hundreds).

use super::{complete_orthonormal, dot, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;
const ROTATION_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvdMode {
    /// `min(rows, cols)` singular triples.
    Thin,
    /// Square orthonormal `left` (rows x rows) and `right` (cols x cols).
    Full,
}

/// Result of [`svd`]: `A = left * diag(singular_values) * right^T`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub left: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub right: DenseMatrix,
}

impl SvdResult {
    /// Reconstructs `U S V^T`; intended for tests and small matrices.
    pub fn reconstruct(&self) -> DenseMatrix {
        let m = self.singular_values.len();
        let mut scaled = DenseMatrix::zeros(self.left.rows(), m);
        for j in 0..m {
            let s = self.singular_values[j];
            for i in 0..self.left.rows() {
                scaled[(i, j)] = self.left[(i, j)] * s;
            }
        }
        let right_cols = DenseMatrix::from_fn(self.right.rows(), m, |i, j| self.right[(i, j)]);
        scaled.matmul_a_bt(&right_cols)
    }
}

pub fn svd(a: &DenseMatrix, mode: SvdMode) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::invalid("svd input contains non-finite entries"));
    }
    if a.cols() > a.rows() {
        let flipped = svd(&a.transpose(), mode)?;
        return Ok(SvdResult {
            left: flipped.right,
            singular_values: flipped.singular_values,
            right: flipped.left,
        });
    }

    let n = a.rows();
    let m = a.cols();

    // Column-major working copies: b holds the rotated columns of A, v the
    // accumulated right rotations.
    let mut b: Vec<Vec<f64>> = (0..m).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let (alpha, beta, gamma) = {
                    let bp = &b[p];
                    let bq = &b[q];
                    (dot(bp, bp), dot(bq, bq), dot(bp, bq))
                };
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut b, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    // Singular values are the column norms; normalized columns give U.
    let mut order: Vec<usize> = (0..m).collect();
    let norms: Vec<f64> = b.iter().map(|col| dot(col, col).sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let scale = norms.iter().cloned().fold(0.0f64, f64::max);
    let rank_tol = scale * f64::EPSILON;

    let mut left_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut singular_values = Vec::with_capacity(m);
    let mut right_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut deficient: Vec<usize> = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        right_cols.push(v[j].clone());
        if s > rank_tol && s > 0.0 {
            let inv = 1.0 / s;
            left_cols.push(b[j].iter().map(|x| x * inv).collect());
        } else {
            // Placeholder; filled below with a vector orthogonal to the rest.
            left_cols.push(Vec::new());
            deficient.push(slot);
        }
    }
    if !deficient.is_empty() {
        let mut present: Vec<Vec<f64>> = left_cols
            .iter()
            .filter(|c| !c.is_empty())
            .cloned()
            .collect();
        let have = present.len();
        complete_orthonormal(&mut present, n, m);
        for (extra, &slot) in deficient.iter().enumerate() {
            left_cols[slot] = present[have + extra].clone();
            singular_values[slot] = 0.0;
        }
    }

    // Sign convention: first nonzero entry of each left vector positive,
    // with the matching right vector flipped alongside.
    for (u, w) in left_cols.iter_mut().zip(right_cols.iter_mut()) {
        if needs_flip(u) {
            for x in u.iter_mut() {
                *x = -*x;
            }
            for x in w.iter_mut() {
                *x = -*x;
            }
        }
    }

    let (left, right) = match mode {
        SvdMode::Thin => (
            cols_to_matrix(&left_cols, n),
            cols_to_matrix(&right_cols, m),
        ),
        SvdMode::Full => {
            complete_orthonormal(&mut left_cols, n, n);
            complete_orthonormal(&mut right_cols, m, m);
            (
                cols_to_matrix(&left_cols, n),
                cols_to_matrix(&right_cols, m),
            )
        }
    };

    Ok(SvdResult {
        left,
        singular_values,
        right,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let bp = &mut head[p];
    let bq = &mut tail[0];
    for (xp, xq) in bp.iter_mut().zip(bq.iter_mut()) {
        let old_p = *xp;
        let old_q = *xq;
        *xp = c * old_p - s * old_q;
        *xq = s * old_p + c * old_q;
    }
}

pub(super) fn needs_flip(v: &[f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return false;
    }
    for &x in v {
        if x.abs() > 1e-12 * scale {
            return x < 0.0;
        }
    }
    false
}

fn cols_to_matrix(cols: &[Vec<f64>], rows: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}
