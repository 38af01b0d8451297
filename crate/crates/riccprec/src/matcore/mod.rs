//! Dense linear-algebra kernels that every other module builds on: matrix
//! storage and products, thin/full SVD, symmetric eigendecomposition,
//! Gram-Schmidt orthonormalization, LU solves and the sample covariance.
//!
//! Conventions used throughout the crate:
//!
//! * matrices are row-major `f64`;
//! * the covariance of an N x T signal matrix is `C = (1/T) X X^T`
//!   (divide by the sample count, not `T - 1`);
//! * singular values and eigenvalues are returned in non-increasing order,
//!   and the first nonzero entry of every returned singular/eigen vector is
//!   made positive so tests can compare vectors directly.

mod eig;
mod svd;

pub use eig::{sym_eig, sym_inverse, SymEig};
pub use svd::{svd, SvdMode, SvdResult};

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Threshold below which a Gram-Schmidt pivot is considered zero.
const GS_PIVOT_TOL: f64 = 1e-12;

/// Dense row-major matrix of 64-bit reals.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major values, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols + 1,
                col: pos % cols + 1,
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::invalid("matrix needs at least one row and column"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                let out_row = out.row_mut(i);
                for j in 0..b_row.len() {
                    out_row[j] += aik * b_row[j];
                }
            }
        }
        out
    }

    /// `self^T * other`, without materializing the transpose.
    pub fn matmul_at_b(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "matmul_at_b dimension mismatch");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &aki) in a_row.iter().enumerate() {
                if aki == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(i);
                for j in 0..b_row.len() {
                    out_row[j] += aki * b_row[j];
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn matmul_a_bt(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_a_bt dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += a_row[k] * b_row[k];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        let values = self.values.iter().map(|v| v * factor).collect();
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Max absolute deviation from symmetry, `max_ij |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Restriction to the given row indices.
    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(indices.len(), self.cols);
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        out
    }

    /// Principal submatrix on the given indices (rows and columns).
    pub fn principal_submatrix(&self, indices: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(indices.len(), indices.len());
        for (r, &i) in indices.iter().enumerate() {
            for (c, &j) in indices.iter().enumerate() {
                out[(r, c)] = self[(i, j)];
            }
        }
        out
    }

    /// Columns glued side by side; all inputs must share the row count.
    pub fn hcat(blocks: &[&DenseMatrix]) -> Result<DenseMatrix> {
        let rows = blocks
            .first()
            .ok_or_else(|| Error::invalid("hcat of zero blocks"))?
            .rows;
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::invalid("hcat row-count mismatch"));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            let mut offset = 0;
            for b in blocks {
                out.row_mut(i)[offset..offset + b.cols].copy_from_slice(b.row(i));
                offset += b.cols;
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)
    }
}

/// Sample covariance `C = (1/T) X X^T` of an N x T matrix.
///
/// Rows are assumed already normalized (see `ingest::normalize`); with
/// unit-variance rows under the `1/T` convention the diagonal of the result
/// is 1.
pub fn covariance(x: &DenseMatrix) -> Result<DenseMatrix> {
    covariance_scaled(x, x.cols())
}

/// Covariance with an explicit sample count, `C = (1/samples) X X^T`.
///
/// Used when `x` is a randomized compression of a longer recording: the
/// divisor stays the original sample count so the compressed covariance
/// approximates the full one.
pub fn covariance_scaled(x: &DenseMatrix, samples: usize) -> Result<DenseMatrix> {
    if samples < 2 {
        return Err(Error::invalid(format!(
            "covariance needs at least 2 samples, got {samples}"
        )));
    }
    let n = x.rows();
    let mut c = DenseMatrix::zeros(n, n);
    let inv_t = 1.0 / samples as f64;
    for i in 0..n {
        let xi = x.row(i);
        for j in i..n {
            let xj = x.row(j);
            let mut acc = 0.0;
            for k in 0..x.cols() {
                acc += xi[k] * xj[k];
            }
            let v = acc * inv_t;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Orthonormalizes the columns of `u` (modified Gram-Schmidt with one
/// re-orthogonalization pass). The output spans the same subspace.
///
/// Fails with [`Error::RankDeficient`] naming the first column whose pivot
/// norm falls below `1e-12` relative to the column's original norm.
pub fn gram_schmidt(u: &DenseMatrix) -> Result<DenseMatrix> {
    let n = u.rows();
    let k = u.cols();
    // column-major scratch
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = u.col(j);
        let orig_norm = norm(&v);
        for _pass in 0..2 {
            for qi in q.iter() {
                let d = dot(qi, &v);
                for (vv, &qq) in v.iter_mut().zip(qi.iter()) {
                    *vv -= d * qq;
                }
            }
        }
        let pivot = norm(&v);
        if pivot <= GS_PIVOT_TOL * (1.0 + orig_norm) {
            return Err(Error::RankDeficient { column: j });
        }
        let inv = 1.0 / pivot;
        for vv in v.iter_mut() {
            *vv *= inv;
        }
        q.push(v);
    }
    let mut out = DenseMatrix::zeros(n, k);
    for (j, col) in q.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Extends a set of orthonormal length-`n` columns to `total` columns by
/// orthogonalizing canonical basis vectors against the set. Deterministic.
pub(crate) fn complete_orthonormal(existing: &mut Vec<Vec<f64>>, n: usize, total: usize) {
    let mut canonical = 0usize;
    while existing.len() < total {
        assert!(canonical < n, "cannot complete orthonormal basis");
        let mut v = vec![0.0; n];
        v[canonical] = 1.0;
        canonical += 1;
        for _pass in 0..2 {
            for q in existing.iter() {
                let d = dot(q, &v);
                for (vv, &qq) in v.iter_mut().zip(q.iter()) {
                    *vv -= d * qq;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            let inv = 1.0 / nv;
            for vv in v.iter_mut() {
                *vv *= inv;
            }
            existing.push(v);
        }
    }
}

/// LU factorization with partial pivoting, for solving against small square
/// penalty matrices without forming explicit inverses.
pub(crate) struct Lu {
    n: usize,
    lu: DenseMatrix,
    perm: Vec<usize>,
}

pub(crate) fn lu_factor(a: &DenseMatrix) -> Result<Lu> {
    assert_eq!(a.rows(), a.cols(), "LU needs a square matrix");
    let n = a.rows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a.max_abs().max(1.0);
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in (k + 1)..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= 1e-13 * scale {
            return Err(Error::RankDeficient { column: k });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
        }
    }
    Ok(Lu { n, lu, perm })
}

impl Lu {
    #[allow(clippy::needless_range_loop)] // triangular solve reads and writes one buffer
    fn solve_vec(&self, b: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = b[self.perm[i]];
        }
        for i in 0..n {
            let mut acc = out[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * out[j];
            }
            out[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = out[i];
            for j in (i + 1)..n {
                acc -= self.lu[(i, j)] * out[j];
            }
            out[i] = acc / self.lu[(i, i)];
        }
    }

    /// Solves `A X = B` column by column.
    pub(crate) fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.rows(), self.n);
        let mut out = DenseMatrix::zeros(self.n, b.cols());
        let mut rhs = vec![0.0; self.n];
        let mut sol = vec![0.0; self.n];
        for j in 0..b.cols() {
            for i in 0..self.n {
                rhs[i] = b[(i, j)];
            }
            self.solve_vec(&rhs, &mut sol);
            for i in 0..self.n {
                out[(i, j)] = sol[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = SplitMix64::new(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.next_gaussian())
    }

    #[test]
    fn new_rejects_non_finite() {
        let err = DenseMatrix::new(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        match err {
            Error::NonFinite { row: 1, col: 2 } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn matmul_against_hand_example() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.values(), &[19.0, 22.0, 43.0, 50.0]);
        let d = a.matmul_at_b(&b);
        assert_eq!(d.values(), &[26.0, 30.0, 38.0, 44.0]);
        let e = a.matmul_a_bt(&b);
        assert_eq!(e.values(), &[17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn covariance_identical_rows_give_unit_correlation() {
        let row: Vec<f64> = vec![1.0, -1.0, 1.0, -1.0]; // mean 0, variance 1
        let x = DenseMatrix::from_rows(&[row.clone(), row]).unwrap();
        let c = covariance(&x).unwrap();
        assert!((c[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_orthogonal_rows_give_zero() {
        let x = DenseMatrix::from_rows(&[vec![1.0, 1.0, -1.0, -1.0], vec![1.0, -1.0, 1.0, -1.0]])
            .unwrap();
        let c = covariance(&x).unwrap();
        assert_eq!(c[(0, 1)], 0.0);
    }

    #[test]
    fn covariance_matches_triple_loop_oracle() {
        // oracle: plain summation, one entry at a time
        let x = random_matrix(4, 50, 11);
        let c = covariance(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..50 {
                    acc += x[(i, k)] * x[(j, k)];
                }
                acc /= 50.0;
                assert!((c[(i, j)] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_rejects_single_sample() {
        let x = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(covariance(&x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        for seed in 0..5u64 {
            let x = random_matrix(6, 30, 100 + seed);
            let c = covariance(&x).unwrap();
            let eig = sym_eig(&c).unwrap();
            for &l in &eig.values {
                assert!(l >= -1e-10, "covariance eigenvalue {l} below tolerance");
            }
        }
    }

    #[test]
    fn gram_schmidt_fixed_point_up_to_sign() {
        let q = gram_schmidt(&random_matrix(20, 5, 3)).unwrap();
        let q2 = gram_schmidt(&q).unwrap();
        for j in 0..5 {
            let a = q.col(j);
            let b = q2.col(j);
            let d = dot(&a, &b).abs();
            assert!((d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_schmidt_two_column_case() {
        let u = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let q = gram_schmidt(&u).unwrap();
        let g = q.matmul_at_b(&q);
        assert!(g.sub(&DenseMatrix::identity(2)).max_abs() < 1e-12);
        // Span check: second input column must be reachable from Q.
        let c = q.matmul(&q.matmul_at_b(&u));
        assert!(c.sub(&u).max_abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_projector_matches_svd_span_oracle() {
        let a = random_matrix(100, 10, 7);
        let q = gram_schmidt(&a).unwrap();
        let s = svd(&a, SvdMode::Thin).unwrap();
        let p_gs = q.matmul_a_bt(&q);
        let p_svd = s.left.matmul_a_bt(&s.left);
        assert!(p_gs.sub(&p_svd).frobenius_norm() < 1e-8);
    }

    #[test]
    fn gram_schmidt_reports_offending_column() {
        let mut u = random_matrix(10, 3, 9);
        for i in 0..10 {
            u[(i, 2)] = u[(i, 0)] + u[(i, 1)];
        }
        match gram_schmidt(&u) {
            Err(Error::RankDeficient { column: 2 }) => {}
            other => panic!("expected rank-deficient column 2, got {other:?}"),
        }
    }

    #[test]
    fn lu_solve_matches_hand_inverse() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![5.0, 3.0]]).unwrap();
        let lu = lu_factor(&a).unwrap();
        let x = lu.solve_matrix(&DenseMatrix::identity(2));
        // inverse of [[2,1],[5,3]] is [[3,-1],[-5,2]]
        let expected = DenseMatrix::from_rows(&[vec![3.0, -1.0], vec![-5.0, 2.0]]).unwrap();
        assert!(x.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(lu_factor(&a), Err(Error::RankDeficient { .. })));
    }
}
