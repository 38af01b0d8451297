//! Closed-form estimation of Riccati-regularized precision matrices, the
//! Hadamard (diagonal-weight) special case, and the Tikhonov baseline.
//!
//! For a normalized N x T signal matrix `X` with covariance `C = (1/T)XX^T`,
//! an invertible weight matrix `V` and a penalty strength `rho`, the
//! estimator maximizes `log det Q - <C,Q> - (rho/2)||V Q V^T||_F^2`. The
//! maximizer satisfies `Q^{-1} - C - rho V^T V Q V^T V = 0` and has a closed
//! form: take the thin SVD `U S Z^T` of the whitened data
//! `(1/sqrt(T)) V^{-T} X`, map each singular value through
//! `omega_i = sqrt(1/rho + s_i^4 / 4 rho^2) - s_i^2 / 2 rho - 1/sqrt(rho)`,
//! and assemble `Q = W diag(omega) W^T + (1/sqrt(rho)) V^{-1} V^{-T}` with
//! `W = V^{-1} U`.
//!
//! Two conventions that are easy to get wrong:
//!
//! * the scalar map consumes covariance eigenvalues `d = s^2`, where `s` is
//!   a singular value of the whitened data, not of `X` itself;
//! * `omega_i` is non-positive for identity weights (the low-rank block
//!   lowers the baseline eigenvalue `1/sqrt(rho)` toward `p(d)`), so all
//!   downstream spectral code treats the middle block as sign-indefinite.
//!
//! The dense N x N precision is never materialized for large N; consumers
//! work on the factors and [`FactoredPrecision::densify`] refuses above a
//! caller-provided cap.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{read_f64, read_u64, DataMatrix, DataState};
use crate::matcore::{gram_schmidt, lu_factor, svd, sym_eig, DenseMatrix, SvdMode};

/// Dense materialization is refused above this dimension unless the caller
/// raises the cap explicitly.
pub const DEFAULT_DENSIFY_CAP: usize = 2000;

/// Magic prefix of the factored-precision file format.
pub const PRECISION_MAGIC: &[u8; 8] = b"RPQFAC1\0";

/// Columns whose mapped eigenvalue deviates from the baseline by less than
/// this are dropped from the factored form.
const OMEGA_DROP_TOL: f64 = 1e-14;

/// The weight matrix `V` of the penalty in one of three closed forms, plus
/// the penalty strength `rho`.
#[derive(Clone, Debug)]
pub struct PenaltyShape {
    kind: PenaltyKind,
    rho: f64,
}

#[derive(Clone, Debug)]
pub enum PenaltyKind {
    /// `V = alpha * I`.
    ScaledIdentity { alpha: f64 },
    /// `V = diag(weights)`, all weights positive. Makes the penalty an
    /// entrywise weighted squared Frobenius norm with weights
    /// `B = w w^T` (Hadamard form).
    Diagonal { weights: Vec<f64> },
    /// General invertible `V`.
    General { matrix: DenseMatrix },
}

impl PenaltyShape {
    pub fn identity(rho: f64) -> Result<Self> {
        Self::scaled_identity(1.0, rho)
    }

    pub fn scaled_identity(alpha: f64, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid("penalty scale alpha must be positive"));
        }
        Ok(Self {
            kind: PenaltyKind::ScaledIdentity { alpha },
            rho,
        })
    }

    pub fn diagonal(weights: Vec<f64>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if weights.is_empty() {
            return Err(Error::invalid("diagonal penalty needs at least one weight"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::invalid("diagonal penalty weights must be positive"));
        }
        Ok(Self {
            kind: PenaltyKind::Diagonal { weights },
            rho,
        })
    }

    /// Diagonal penalty that suppresses nodes outside a region of interest:
    /// weight 1 on the given rows, `alpha` elsewhere. Raising `alpha`
    /// gradually isolates the selected rows from the rest of the graph.
    pub fn roi(n: usize, inside: &[usize], alpha: f64, rho: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid("roi suppression alpha must be positive"));
        }
        if inside.iter().any(|&i| i >= n) {
            return Err(Error::invalid("roi node index out of range"));
        }
        let mut weights = vec![alpha; n];
        for &i in inside {
            weights[i] = 1.0;
        }
        Self::diagonal(weights, rho)
    }

    pub fn general(matrix: DenseMatrix, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        if matrix.rows() != matrix.cols() {
            return Err(Error::invalid("general penalty matrix must be square"));
        }
        let spectrum = svd(&matrix, SvdMode::Thin)?.singular_values;
        let largest = spectrum.first().copied().unwrap_or(0.0);
        let smallest = spectrum.last().copied().unwrap_or(0.0);
        if smallest <= 1e-10 * largest {
            // name the first column Gram-Schmidt chokes on, if any
            let column = match gram_schmidt(&matrix) {
                Err(Error::RankDeficient { column }) => column,
                _ => matrix.cols() - 1,
            };
            return Err(Error::RankDeficient { column });
        }
        Ok(Self {
            kind: PenaltyKind::General { matrix },
            rho,
        })
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[inline]
    pub fn kind(&self) -> &PenaltyKind {
        &self.kind
    }

    /// Row dimension the penalty applies to, if it pins one.
    pub fn dimension(&self) -> Option<usize> {
        match &self.kind {
            PenaltyKind::ScaledIdentity { .. } => None,
            PenaltyKind::Diagonal { weights } => Some(weights.len()),
            PenaltyKind::General { matrix } => Some(matrix.rows()),
        }
    }

    /// `(1/sqrt(T)) V^{-T} X`.
    pub(crate) fn whiten(&self, x: &DenseMatrix, inv_sqrt_t: f64) -> Result<DenseMatrix> {
        match &self.kind {
            PenaltyKind::ScaledIdentity { alpha } => Ok(x.scaled(inv_sqrt_t / alpha)),
            PenaltyKind::Diagonal { weights } => {
                let mut out = x.clone();
                for (i, w) in weights.iter().enumerate() {
                    let f = inv_sqrt_t / w;
                    for v in out.row_mut(i) {
                        *v *= f;
                    }
                }
                Ok(out)
            }
            PenaltyKind::General { matrix } => {
                let lu = lu_factor(&matrix.transpose())?;
                Ok(lu.solve_matrix(x).scaled(inv_sqrt_t))
            }
        }
    }

    /// `V^{-1} U`.
    pub(crate) fn unwhiten_basis(&self, u: &DenseMatrix) -> Result<DenseMatrix> {
        match &self.kind {
            PenaltyKind::ScaledIdentity { alpha } => Ok(u.scaled(1.0 / alpha)),
            PenaltyKind::Diagonal { weights } => {
                let mut out = u.clone();
                for (i, w) in weights.iter().enumerate() {
                    let f = 1.0 / w;
                    for v in out.row_mut(i) {
                        *v *= f;
                    }
                }
                Ok(out)
            }
            PenaltyKind::General { matrix } => {
                let lu = lu_factor(matrix)?;
                Ok(lu.solve_matrix(u))
            }
        }
    }

    /// `c * V^{-1} V^{-T}` folded into the cheapest exact representation.
    pub(crate) fn folded_baseline(&self, c: f64, n: usize) -> Result<Baseline> {
        match &self.kind {
            PenaltyKind::ScaledIdentity { alpha } => Ok(Baseline::Scalar(c / (alpha * alpha))),
            PenaltyKind::Diagonal { weights } => {
                if weights.len() != n {
                    return Err(Error::invalid(format!(
                        "penalty weights cover {} rows but data has {n}",
                        weights.len()
                    )));
                }
                Ok(Baseline::Diagonal(
                    weights.iter().map(|w| c / (w * w)).collect(),
                ))
            }
            PenaltyKind::General { matrix } => {
                let lu = lu_factor(matrix)?;
                let v_inv = lu.solve_matrix(&DenseMatrix::identity(n));
                Ok(Baseline::Dense(v_inv.matmul_a_bt(&v_inv).scaled(c)))
            }
        }
    }

    /// Dense `V^T V`, used by the stationarity diagnostic.
    fn vtv(&self, n: usize) -> DenseMatrix {
        match &self.kind {
            PenaltyKind::ScaledIdentity { alpha } => DenseMatrix::identity(n).scaled(alpha * alpha),
            PenaltyKind::Diagonal { weights } => {
                DenseMatrix::diagonal(&weights.iter().map(|w| w * w).collect::<Vec<_>>())
            }
            PenaltyKind::General { matrix } => matrix.matmul_at_b(matrix),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// The full-rank part `c * V^{-1} V^{-T}` of a factored precision, stored in
/// the cheapest exact form.
#[derive(Clone, Debug)]
pub enum Baseline {
    /// `value * I` (identity or scaled-identity weights; value = c/alpha^2).
    Scalar(f64),
    /// `diag(values)` (diagonal weights; values_i = c/w_i^2).
    Diagonal(Vec<f64>),
    /// Dense `c * V^{-1} V^{-T}` for general weights (small N only).
    Dense(DenseMatrix),
}

impl Baseline {
    fn kind_tag(&self) -> u8 {
        match self {
            Baseline::Scalar(_) => 0,
            Baseline::Diagonal(_) => 1,
            Baseline::Dense(_) => 2,
        }
    }

    fn add_to(&self, q: &mut DenseMatrix) {
        match self {
            Baseline::Scalar(b) => {
                for i in 0..q.rows() {
                    q[(i, i)] += b;
                }
            }
            Baseline::Diagonal(b) => {
                for i in 0..q.rows() {
                    q[(i, i)] += b[i];
                }
            }
            Baseline::Dense(b) => {
                for i in 0..q.rows() {
                    for j in 0..q.cols() {
                        q[(i, j)] += b[(i, j)];
                    }
                }
            }
        }
    }
}

/// A precision matrix stored as `W diag(omega) W^T + baseline`, never
/// densified for large N.
#[derive(Clone, Debug)]
pub struct FactoredPrecision {
    /// N x m, `W = V^{-1} U`; orthonormal only for identity weights.
    basis: DenseMatrix,
    /// Length m, sign-indefinite.
    omega: Vec<f64>,
    baseline: Baseline,
    rho: f64,
    /// The unfolded baseline constant: `1/sqrt(rho)` for Riccati estimates,
    /// `1/rho` for Tikhonov.
    baseline_c: f64,
    /// Sample count of the data the estimate was computed from.
    source_samples: usize,
}

impl FactoredPrecision {
    pub fn from_parts(
        basis: DenseMatrix,
        omega: Vec<f64>,
        baseline: Baseline,
        rho: f64,
        baseline_c: f64,
        source_samples: usize,
    ) -> Result<Self> {
        if basis.cols() != omega.len() {
            return Err(Error::invalid("omega length must match basis columns"));
        }
        let n = basis.rows();
        match &baseline {
            Baseline::Scalar(b) => {
                if !b.is_finite() || *b <= 0.0 {
                    return Err(Error::invalid("scalar baseline must be positive"));
                }
            }
            Baseline::Diagonal(b) => {
                if b.len() != n {
                    return Err(Error::invalid("diagonal baseline length mismatch"));
                }
                if b.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::invalid("diagonal baseline must be positive"));
                }
            }
            Baseline::Dense(b) => {
                if b.rows() != n || b.cols() != n {
                    return Err(Error::invalid("dense baseline dimension mismatch"));
                }
            }
        }
        Ok(Self {
            basis,
            omega,
            baseline,
            rho,
            baseline_c,
            source_samples,
        })
    }

    /// Number of nodes N.
    #[inline]
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// Rank m of the low-rank block.
    #[inline]
    pub fn rank(&self) -> usize {
        self.omega.len()
    }

    #[inline]
    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    #[inline]
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    #[inline]
    pub fn baseline(&self) -> &Baseline {
        &self.baseline
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[inline]
    pub fn baseline_c(&self) -> f64 {
        self.baseline_c
    }

    #[inline]
    pub fn source_samples(&self) -> usize {
        self.source_samples
    }

    pub fn densify(&self) -> Result<DenseMatrix> {
        self.densify_with_cap(DEFAULT_DENSIFY_CAP)
    }

    /// Materializes `W diag(omega) W^T + baseline`. Exactly symmetric by
    /// construction (the upper triangle is computed once and mirrored).
    pub fn densify_with_cap(&self, cap: usize) -> Result<DenseMatrix> {
        let n = self.dim();
        if n > cap {
            return Err(Error::TooLarge { n, cap });
        }
        let mut q = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let wi = self.basis.row(i);
            for j in i..n {
                let wj = self.basis.row(j);
                let mut acc = 0.0;
                for (k, &om) in self.omega.iter().enumerate() {
                    acc += om * wi[k] * wj[k];
                }
                q[(i, j)] = acc;
                q[(j, i)] = acc;
            }
        }
        self.baseline.add_to(&mut q);
        // mirror dense baselines too, in case they carry roundoff asymmetry
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (q[(i, j)] + q[(j, i)]);
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
        }
        Ok(q)
    }

    /// `log det Q` without densifying, for scalar and diagonal baselines.
    /// General (dense) baselines fall back to a dense eigendecomposition
    /// under the default cap.
    pub fn logdet(&self) -> Result<f64> {
        let n = self.dim();
        match &self.baseline {
            Baseline::Scalar(beta) => {
                let mu = signed_lowrank_eigenvalues(&self.basis, &self.omega)?;
                let mut total = n as f64 * beta.ln();
                for m in mu {
                    let ratio = m / beta;
                    if ratio <= -1.0 {
                        return Err(Error::numerical(
                            "logdet: factored precision is not positive definite",
                        ));
                    }
                    total += ratio.ln_1p();
                }
                Ok(total)
            }
            Baseline::Diagonal(b) => {
                // Q = B^{1/2} (I + Wt diag(omega) Wt^T) B^{1/2},
                // Wt = B^{-1/2} W
                let mut whitened = self.basis.clone();
                let mut total = 0.0;
                for (i, bi) in b.iter().enumerate() {
                    total += bi.ln();
                    let f = 1.0 / bi.sqrt();
                    for v in whitened.row_mut(i) {
                        *v *= f;
                    }
                }
                let mu = signed_lowrank_eigenvalues(&whitened, &self.omega)?;
                for m in mu {
                    if m <= -1.0 {
                        return Err(Error::numerical(
                            "logdet: factored precision is not positive definite",
                        ));
                    }
                    total += m.ln_1p();
                }
                Ok(total)
            }
            Baseline::Dense(_) => {
                let q = self.densify()?;
                let eig = sym_eig(&q)?;
                let mut total = 0.0;
                for l in eig.values {
                    if l <= 0.0 {
                        return Err(Error::numerical(
                            "logdet: densified precision is not positive definite",
                        ));
                    }
                    total += l.ln();
                }
                Ok(total)
            }
        }
    }

    /// `trace(C Q)` computed on the factors:
    /// `sum_i omega_i (w_i^T C w_i) + trace(C * baseline)`.
    pub fn trace_product(&self, c: &DenseMatrix) -> Result<f64> {
        let n = self.dim();
        if c.rows() != n || c.cols() != n {
            return Err(Error::invalid(format!(
                "trace_product dimension mismatch: precision is {n}, matrix is {}x{}",
                c.rows(),
                c.cols()
            )));
        }
        let mut total = 0.0;
        let cw = c.matmul(&self.basis); // N x m
        for (k, &om) in self.omega.iter().enumerate() {
            let mut quad = 0.0;
            for i in 0..n {
                quad += self.basis[(i, k)] * cw[(i, k)];
            }
            total += om * quad;
        }
        match &self.baseline {
            Baseline::Scalar(b) => {
                let mut trace = 0.0;
                for i in 0..n {
                    trace += c[(i, i)];
                }
                total += b * trace;
            }
            Baseline::Diagonal(b) => {
                for i in 0..n {
                    total += b[i] * c[(i, i)];
                }
            }
            Baseline::Dense(b) => {
                for i in 0..n {
                    for j in 0..n {
                        total += b[(i, j)] * c[(i, j)];
                    }
                }
            }
        }
        Ok(total)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let n = self.dim();
        let m = self.rank();
        w.write_all(PRECISION_MAGIC)?;
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(m as u64).to_le_bytes())?;
        w.write_all(&[self.baseline.kind_tag()])?;
        w.write_all(&self.rho.to_le_bytes())?;
        w.write_all(&self.baseline_c.to_le_bytes())?;
        w.write_all(&(self.source_samples as u64).to_le_bytes())?;
        // W column-major
        for j in 0..m {
            for i in 0..n {
                w.write_all(&self.basis[(i, j)].to_le_bytes())?;
            }
        }
        for om in &self.omega {
            w.write_all(&om.to_le_bytes())?;
        }
        match &self.baseline {
            Baseline::Scalar(b) => w.write_all(&b.to_le_bytes())?,
            Baseline::Diagonal(b) => {
                for v in b {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            Baseline::Dense(b) => {
                for j in 0..n {
                    for i in 0..n {
                        w.write_all(&b[(i, j)].to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Truncated("missing precision header".into()))?;
        if &magic != PRECISION_MAGIC {
            return Err(Error::Format("not a factored-precision file".into()));
        }
        let n = read_u64(r)? as usize;
        let m = read_u64(r)? as usize;
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)
            .map_err(|_| Error::Truncated("missing baseline kind".into()))?;
        let rho = read_f64(r)?;
        let baseline_c = read_f64(r)?;
        let source_samples = read_u64(r)? as usize;
        if n == 0 {
            return Err(Error::Format("precision header declares zero nodes".into()));
        }
        // column-major payload
        let mut basis_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        for _ in 0..m {
            let mut col = Vec::with_capacity(n);
            for _ in 0..n {
                col.push(read_f64(r)?);
            }
            basis_cols.push(col);
        }
        let mut omega = Vec::with_capacity(m);
        for _ in 0..m {
            omega.push(read_f64(r)?);
        }
        let basis = if m == 0 {
            omega.push(0.0);
            DenseMatrix::zeros(n, 1)
        } else {
            DenseMatrix::from_fn(n, m, |i, j| basis_cols[j][i])
        };
        let baseline = match kind[0] {
            0 => Baseline::Scalar(read_f64(r)?),
            1 => {
                let mut b = Vec::with_capacity(n);
                for _ in 0..n {
                    b.push(read_f64(r)?);
                }
                Baseline::Diagonal(b)
            }
            2 => {
                let mut b = DenseMatrix::zeros(n, n);
                for j in 0..n {
                    for i in 0..n {
                        b[(i, j)] = read_f64(r)?;
                    }
                }
                Baseline::Dense(b)
            }
            other => {
                return Err(Error::Format(format!("unknown baseline kind {other}")));
            }
        };
        if !basis.is_finite() || omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite factored payload".into()));
        }
        Self::from_parts(basis, omega, baseline, rho, baseline_c, source_samples)
    }
}

/// The scalar spectral map: the positive root `p` of `rho p^2 + d p - 1 = 0`,
/// i.e. `1/p - d - rho p = 0`. Strictly decreasing in `d`, with
/// `p(0) = 1/sqrt(rho)`.
///
/// Evaluated as `2 / (d + sqrt(d^2 + 4 rho))`, which avoids the cancellation
/// the textbook `sqrt(...) - d/2rho` form suffers for large `d`.
pub fn riccati_eigenvalue_map(d: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if !d.is_finite() || d < 0.0 {
        return Err(Error::invalid(format!(
            "covariance eigenvalue must be non-negative, got {d}"
        )));
    }
    Ok(2.0 / (d + (d * d + 4.0 * rho).sqrt()))
}

/// Riccati-regularized precision of normalized data under the given penalty.
///
/// `x` must either be row-normalized (zero mean, unit variance within 1e-6;
/// all-zero rows are tolerated and contribute only the baseline) or descend
/// from normalized data through [`crate::randproj::random_project`].
pub fn estimate(x: &DataMatrix, penalty: &PenaltyShape) -> Result<FactoredPrecision> {
    check_estimable(x, penalty)?;
    let rho = penalty.rho();
    let c = 1.0 / rho.sqrt();
    let inv_sqrt_t = 1.0 / (x.effective_samples() as f64).sqrt();
    let whitened = penalty.whiten(x.matrix(), inv_sqrt_t)?;
    let decomposition = svd(&whitened, SvdMode::Thin)?;

    let mut kept_indices = Vec::new();
    let mut omega = Vec::new();
    for (i, &s) in decomposition.singular_values.iter().enumerate() {
        let p = riccati_eigenvalue_map(s * s, rho)?;
        let om = p - c;
        if om.abs() >= OMEGA_DROP_TOL {
            kept_indices.push(i);
            omega.push(om);
        }
    }

    let n = x.signals();
    let basis = if kept_indices.is_empty() {
        DenseMatrix::zeros(n, 1)
    } else {
        let u_kept = DenseMatrix::from_fn(n, kept_indices.len(), |i, j| {
            decomposition.left[(i, kept_indices[j])]
        });
        penalty.unwhiten_basis(&u_kept)?
    };
    let omega = if kept_indices.is_empty() {
        vec![0.0]
    } else {
        omega
    };

    let baseline = penalty.folded_baseline(c, n)?;
    FactoredPrecision::from_parts(basis, omega, baseline, rho, c, x.effective_samples())
}

/// Tikhonov-regularized precision `(C + rho I)^{-1}`, stored in the same
/// factored form: `omega_i = 1/(s_i^2 + rho) - 1/rho`, baseline `1/rho`.
pub fn estimate_tikhonov(x: &DataMatrix, rho: f64) -> Result<FactoredPrecision> {
    check_rho(rho)?;
    let identity = PenaltyShape::identity(rho)?;
    check_estimable(x, &identity)?;
    let inv_sqrt_t = 1.0 / (x.effective_samples() as f64).sqrt();
    let whitened = x.matrix().scaled(inv_sqrt_t);
    let decomposition = svd(&whitened, SvdMode::Thin)?;

    let c = 1.0 / rho;
    let mut kept_indices = Vec::new();
    let mut omega = Vec::new();
    for (i, &s) in decomposition.singular_values.iter().enumerate() {
        let om = 1.0 / (s * s + rho) - c;
        if om.abs() >= OMEGA_DROP_TOL {
            kept_indices.push(i);
            omega.push(om);
        }
    }
    let n = x.signals();
    let basis = if kept_indices.is_empty() {
        DenseMatrix::zeros(n, 1)
    } else {
        DenseMatrix::from_fn(n, kept_indices.len(), |i, j| {
            decomposition.left[(i, kept_indices[j])]
        })
    };
    let omega = if kept_indices.is_empty() {
        vec![0.0]
    } else {
        omega
    };
    FactoredPrecision::from_parts(
        basis,
        omega,
        Baseline::Scalar(c),
        rho,
        c,
        x.effective_samples(),
    )
}

pub(crate) fn check_estimable(x: &DataMatrix, penalty: &PenaltyShape) -> Result<()> {
    if let Some(dim) = penalty.dimension() {
        if dim != x.signals() {
            return Err(Error::invalid(format!(
                "penalty is for {dim} nodes but data has {}",
                x.signals()
            )));
        }
    }
    match x.state() {
        DataState::Projected => Ok(()),
        _ => {
            let t = x.samples() as f64;
            for i in 0..x.signals() {
                let row = x.matrix().row(i);
                let max_abs = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if max_abs == 0.0 {
                    continue; // zero signal: legal, contributes only baseline
                }
                let mean = row.iter().sum::<f64>() / t;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t;
                if mean.abs() > 1e-6 || (var - 1.0).abs() > 1e-6 {
                    return Err(Error::invalid(format!(
                        "row {i} is not normalized (mean {mean:.3e}, variance {var:.6})"
                    )));
                }
            }
            Ok(())
        }
    }
}

/// Eigenvalues of the sign-indefinite low-rank block `W diag(omega) W^T`
/// obtained from the m x m congruence `G^{1/2} diag(omega) G^{1/2}` with
/// `G = W^T W`. The nonzero values coincide with the block's nonzero
/// eigenvalues; padding zeros are harmless to the log-determinant sums they
/// feed.
pub(crate) fn signed_lowrank_eigenvalues(w: &DenseMatrix, omega: &[f64]) -> Result<Vec<f64>> {
    let m = omega.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let gram = w.matmul_at_b(w);
    let eig = sym_eig(&gram)?;
    let mut sqrt_g = DenseMatrix::zeros(m, m);
    for j in 0..m {
        let g = eig.values[j].max(0.0).sqrt();
        for i in 0..m {
            sqrt_g[(i, j)] = eig.vectors[(i, j)] * g;
        }
    }
    let s = sqrt_g.matmul_a_bt(&eig.vectors); // E sqrt(G) E^T
    let mut sd = s.clone();
    for i in 0..m {
        for j in 0..m {
            sd[(i, j)] = s[(i, j)] * omega[j];
        }
    }
    let middle = sd.matmul(&s);
    // symmetrize roundoff before the eigensolve
    let sym = middle.add(&middle.transpose()).scaled(0.5);
    Ok(sym_eig(&sym)?.values)
}

/// Frobenius norm of the stationarity residual
/// `Q^{-1} - C - rho V^T V Q V^T V` for a densified precision. Diagnostic
/// used by the test suites; small N only.
pub fn stationarity_residual(
    q_dense: &DenseMatrix,
    c: &DenseMatrix,
    penalty: &PenaltyShape,
) -> Result<f64> {
    let n = q_dense.rows();
    let eig = sym_eig(q_dense)?;
    let scale = eig.values.first().copied().unwrap_or(0.0);
    if eig.values.iter().any(|&l| l <= 1e-14 * scale) {
        return Err(Error::numerical("stationarity: Q is not positive definite"));
    }
    let mut inv_scaled = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let inv = 1.0 / eig.values[j];
        for i in 0..n {
            inv_scaled[(i, j)] = eig.vectors[(i, j)] * inv;
        }
    }
    let q_inv = inv_scaled.matmul_a_bt(&eig.vectors);
    let vtv = penalty.vtv(n);
    let penalty_term = vtv.matmul(&q_dense.matmul(&vtv)).scaled(penalty.rho());
    let residual = q_inv.sub(c).sub(&penalty_term);
    Ok(residual.frobenius_norm())
}
