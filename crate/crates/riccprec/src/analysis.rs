//! Network biomarkers computed from factored precisions.
//!
//! The entropy of a node subset is half the log-determinant of the precision
//! restricted to those nodes. [`tsee_fast`] computes it without densifying
//! the full matrix whenever the penalty is constant over the subset, at the
//! cost of one small eigensolve.
//!
//! A note on signs: the restricted low-rank block `[W] diag(omega) [W]^T`
//! is sign-indefinite (the estimation map produces non-positive omegas for
//! identity weights), so the fast path cannot take an unsigned SVD of
//! `[W] omega^{1/2}`. Instead it uses the congruence
//! `G^{1/2} diag(omega) G^{1/2}` with `G = [W]^T [W]`, whose eigenvalues are
//! exactly the nonzero eigenvalues of the restricted block regardless of
//! sign. The dense restriction is the authority the fast path is tested
//! against.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcore::{sym_eig, DenseMatrix};
use crate::riccati::{signed_lowrank_eigenvalues, Baseline, FactoredPrecision};

/// A non-empty, strictly increasing set of node indices (zero-based in
/// memory; one-based in network files).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSelection {
    indices: Vec<usize>,
}

impl NetworkSelection {
    /// Builds a selection from zero-based indices; sorts and rejects
    /// duplicates and emptiness.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("network selection is empty"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("network selection has duplicate indices"));
        }
        Ok(Self { indices })
    }

    /// Loads one-based indices, newline-separated, `#` comments allowed.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let reader = BufReader::new(file);
        let mut indices = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let one_based: usize = body.parse().map_err(|e| Error::Parse {
                row: lineno + 1,
                col: 1,
                msg: format!("{e}"),
            })?;
            if one_based == 0 {
                return Err(Error::Parse {
                    row: lineno + 1,
                    col: 1,
                    msg: "node indices are one-based".into(),
                });
            }
            indices.push(one_based - 1);
        }
        Self::new(indices)
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        let last = *self.indices.last().unwrap();
        if last >= n {
            return Err(Error::invalid(format!(
                "network node {} out of range for {n} nodes",
                last + 1
            )));
        }
        Ok(())
    }
}

/// Gaussian entropy of a dense symmetric positive-definite restriction:
/// half its log-determinant, by dense eigendecomposition.
pub fn tsee_direct(q_sub: &DenseMatrix) -> Result<f64> {
    let eig = sym_eig(q_sub)?;
    let mut logdet = 0.0;
    for &l in &eig.values {
        if l <= 0.0 {
            return Err(Error::numerical(
                "entropy restriction is not positive definite",
            ));
        }
        logdet += l.ln();
    }
    Ok(0.5 * logdet)
}

/// Same value as [`tsee_direct`] of the densified restriction, computed on
/// the factors. Requires the precision's baseline to be constant over the
/// selected nodes (weights proportional to the identity there); refuses
/// otherwise rather than silently densifying, so costs stay predictable.
pub fn tsee_fast(q: &FactoredPrecision, net: &NetworkSelection) -> Result<f64> {
    net.validate_for(q.dim())?;
    let beta = net_constant_baseline(q.baseline(), net)?;
    let n = net.len();
    let restricted = q.basis().select_rows(net.indices());
    let m = q.rank();

    // eigenvalues of the restricted low-rank block
    let mu = if m <= n {
        signed_lowrank_eigenvalues(&restricted, q.omega())?
    } else {
        let mut block = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let wi = restricted.row(i);
            for j in i..n {
                let wj = restricted.row(j);
                let mut acc = 0.0;
                for (k, &om) in q.omega().iter().enumerate() {
                    acc += om * wi[k] * wj[k];
                }
                block[(i, j)] = acc;
                block[(j, i)] = acc;
            }
        }
        sym_eig(&block)?.values
    };

    let mut logdet = n as f64 * beta.ln();
    for &m in &mu {
        let ratio = m / beta;
        if ratio <= -1.0 {
            return Err(Error::numerical(
                "restricted precision is not positive definite",
            ));
        }
        logdet += ratio.ln_1p();
    }
    Ok(0.5 * logdet)
}

fn net_constant_baseline(baseline: &Baseline, net: &NetworkSelection) -> Result<f64> {
    match baseline {
        Baseline::Scalar(b) => Ok(*b),
        Baseline::Diagonal(values) => {
            let first = values[net.indices()[0]];
            for &i in net.indices() {
                if (values[i] - first).abs() > 1e-12 * first.abs() {
                    return Err(Error::UnsupportedPenalty(
                        "penalty is not constant over the selected network".into(),
                    ));
                }
            }
            Ok(first)
        }
        Baseline::Dense(_) => Err(Error::UnsupportedPenalty(
            "general penalty baselines have no per-node constant".into(),
        )),
    }
}

/// Partial correlations from a dense precision restriction:
/// `out_ij = -q_ij / sqrt(q_ii q_jj)` off the diagonal, 1 on it.
pub fn partial_correlations(q_sub: &DenseMatrix) -> Result<DenseMatrix> {
    let n = q_sub.rows();
    if q_sub.cols() != n {
        return Err(Error::invalid("partial correlations need a square matrix"));
    }
    if q_sub.asymmetry() > 1e-8 * q_sub.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(
            "partial correlations need a symmetric matrix",
        ));
    }
    let mut inv_sqrt_diag = Vec::with_capacity(n);
    for i in 0..n {
        let d = q_sub[(i, i)];
        if d <= 0.0 {
            return Err(Error::numerical(format!(
                "non-positive precision diagonal at node {i}"
            )));
        }
        inv_sqrt_diag.push(1.0 / d.sqrt());
    }
    let mut out = DenseMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = -q_sub[(i, j)] * inv_sqrt_diag[i] * inv_sqrt_diag[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Mahalanobis distance `sqrt((a-b)^T Q (a-b))` evaluated on the factors:
/// `sum_i omega_i (w_i^T d)^2` plus the baseline quadratic, `d = a - b`.
pub fn mahalanobis(a: &[f64], b: &[f64], q: &FactoredPrecision) -> Result<f64> {
    let n = q.dim();
    if a.len() != n || b.len() != n {
        return Err(Error::invalid(format!(
            "map length mismatch: precision has {n} nodes, maps have {} and {}",
            a.len(),
            b.len()
        )));
    }
    let delta: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut radicand = 0.0;
    for k in 0..q.rank() {
        let mut proj = 0.0;
        for (i, d) in delta.iter().enumerate() {
            proj += q.basis()[(i, k)] * d;
        }
        radicand += q.omega()[k] * proj * proj;
    }
    match q.baseline() {
        Baseline::Scalar(beta) => {
            let norm_sq: f64 = delta.iter().map(|d| d * d).sum();
            radicand += beta * norm_sq;
        }
        Baseline::Diagonal(values) => {
            for i in 0..n {
                radicand += values[i] * delta[i] * delta[i];
            }
        }
        Baseline::Dense(matrix) => {
            for i in 0..n {
                for j in 0..n {
                    radicand += delta[i] * matrix[(i, j)] * delta[j];
                }
            }
        }
    }
    if radicand < -1e-12 {
        return Err(Error::numerical(format!(
            "negative Mahalanobis radicand {radicand:.3e}: precision is not positive definite"
        )));
    }
    Ok(radicand.max(0.0).sqrt())
}
