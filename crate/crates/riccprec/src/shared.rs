//! Population-level estimation: one orthonormal basis shared across the
//! scans of several subjects, with per-subject spectra. All derived
//! precisions share their eigenvectors, so scan specificities live entirely
//! in a short vector of loadings per scan.
//!
//! The shared basis is defined here as the thin SVD of the column-wise
//! concatenation of the whitened subject matrices (optionally compressed
//! per subject by a randomized projection first). This reduces exactly to
//! the single-subject decomposition at K = 1 and is deterministic.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{read_f64, read_u64, DataMatrix};
use crate::matcore::{svd, DenseMatrix, SvdMode};
use crate::randproj::{random_project, ProjectionConfig};
use crate::riccati::{
    check_estimable, riccati_eigenvalue_map, FactoredPrecision, PenaltyKind, PenaltyShape,
};
use crate::rng::SplitMix64;

/// Magic prefix of the shared-basis model file format.
pub const MODEL_MAGIC: &[u8; 8] = b"JSVDM64\0";

/// How the joint decomposition is assembled.
#[derive(Clone, Debug)]
pub struct JsvdOptions {
    /// Scale each subject's block by its own `1/sqrt(T_k)` so subjects with
    /// longer recordings do not dominate the basis (default). When false, a
    /// single global `1/sqrt(sum T_k)` is used and longer scans weigh more.
    pub weight_subjects_equally: bool,
    /// Optional per-subject randomized compression applied before the joint
    /// decomposition, to bound memory. Subject `k` uses stream `seed + k`.
    pub pre_projection: Option<ProjectionConfig>,
}

impl Default for JsvdOptions {
    fn default() -> Self {
        Self {
            weight_subjects_equally: true,
            pre_projection: None,
        }
    }
}

/// One orthonormal basis (in whitened coordinates) shared by K subjects,
/// plus each subject's spectrum along it.
#[derive(Clone, Debug)]
pub struct SharedBasisModel {
    basis: DenseMatrix,
    subject_spectra: Vec<Vec<f64>>,
    penalty: PenaltyShape,
    subject_samples: Vec<usize>,
}

impl SharedBasisModel {
    /// N x m, orthonormal columns.
    #[inline]
    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    #[inline]
    pub fn subject_count(&self) -> usize {
        self.subject_spectra.len()
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn spectrum(&self, k: usize) -> Result<&[f64]> {
        self.subject_spectra
            .get(k)
            .map(|s| s.as_slice())
            .ok_or_else(|| Error::invalid(format!("subject index {k} out of range")))
    }

    #[inline]
    pub fn penalty(&self) -> &PenaltyShape {
        &self.penalty
    }

    /// Serializes the model: header `{N, m, K, rho}`, then the basis
    /// column-major and the K spectra, real-64 little-endian. Only
    /// identity-weight models are representable on disk (the header carries
    /// no weight payload).
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        match self.penalty.kind() {
            PenaltyKind::ScaledIdentity { alpha } if *alpha == 1.0 => {}
            _ => {
                return Err(Error::UnsupportedPenalty(
                    "model files store identity-weight models only".into(),
                ))
            }
        }
        let n = self.dim();
        let m = self.rank();
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(m as u64).to_le_bytes())?;
        w.write_all(&(self.subject_count() as u64).to_le_bytes())?;
        w.write_all(&self.penalty.rho().to_le_bytes())?;
        for j in 0..m {
            for i in 0..n {
                w.write_all(&self.basis[(i, j)].to_le_bytes())?;
            }
        }
        for spectrum in &self.subject_spectra {
            for d in spectrum {
                w.write_all(&d.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a model back. The file format does not carry per-subject
    /// sample counts, so precisions rebuilt from a loaded model report a
    /// source sample count of zero (provenance unknown).
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Truncated("missing model header".into()))?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format("not a shared-basis model file".into()));
        }
        let n = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let k = read_u64(&mut r)? as usize;
        let rho = read_f64(&mut r)?;
        if n == 0 || m == 0 || k == 0 {
            return Err(Error::Format("model header declares an empty model".into()));
        }
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
        for _ in 0..m {
            let mut col = Vec::with_capacity(n);
            for _ in 0..n {
                col.push(read_f64(&mut r)?);
            }
            cols.push(col);
        }
        let basis = DenseMatrix::from_fn(n, m, |i, j| cols[j][i]);
        let mut subject_spectra = Vec::with_capacity(k);
        for _ in 0..k {
            let mut spectrum = Vec::with_capacity(m);
            for _ in 0..m {
                spectrum.push(read_f64(&mut r)?);
            }
            subject_spectra.push(spectrum);
        }
        Ok(Self {
            basis,
            subject_spectra,
            penalty: PenaltyShape::identity(rho)?,
            subject_samples: vec![0; k],
        })
    }
}

/// Fits the shared basis over K subjects and records each subject's
/// spectrum `d_{k,i} = || A_k^T w_i ||^2` along it, where `A_k` is the
/// subject's whitened block.
pub fn fit_shared(
    subjects: &[DataMatrix],
    m: usize,
    penalty: &PenaltyShape,
    options: &JsvdOptions,
) -> Result<SharedBasisModel> {
    if subjects.is_empty() {
        return Err(Error::invalid("fit_shared needs at least one subject"));
    }
    let n = subjects[0].signals();
    if subjects.iter().any(|x| x.signals() != n) {
        return Err(Error::invalid("subjects disagree on node count"));
    }
    for x in subjects {
        check_estimable(x, penalty)?;
    }

    // optional per-subject compression, streamed off the model seed
    let mut compressed: Vec<DataMatrix> = Vec::with_capacity(subjects.len());
    for (k, x) in subjects.iter().enumerate() {
        match &options.pre_projection {
            Some(cfg) => {
                let sub_cfg = ProjectionConfig {
                    target_dim: cfg.target_dim.min(x.samples()),
                    power_iterations: cfg.power_iterations,
                    seed: SplitMix64::stream(cfg.seed, k as u64).next_u64(),
                };
                compressed.push(random_project(x, &sub_cfg)?.data);
            }
            None => compressed.push(x.clone()),
        }
    }

    let min_cols = compressed.iter().map(|x| x.samples()).min().unwrap();
    if m == 0 || m > min_cols.min(n) {
        return Err(Error::invalid(format!(
            "basis size {m} outside 1..={}",
            min_cols.min(n)
        )));
    }

    let total_samples: usize = compressed.iter().map(|x| x.effective_samples()).sum();
    let mut blocks_for_basis: Vec<DenseMatrix> = Vec::with_capacity(compressed.len());
    let mut blocks_for_spectra: Vec<DenseMatrix> = Vec::with_capacity(compressed.len());
    for x in &compressed {
        let own_scale = 1.0 / (x.effective_samples() as f64).sqrt();
        let basis_scale = if options.weight_subjects_equally {
            own_scale
        } else {
            1.0 / (total_samples as f64).sqrt()
        };
        blocks_for_basis.push(penalty.whiten(x.matrix(), basis_scale)?);
        // spectra always use the subject's own covariance scale
        blocks_for_spectra.push(penalty.whiten(x.matrix(), own_scale)?);
    }

    let refs: Vec<&DenseMatrix> = blocks_for_basis.iter().collect();
    let concatenated = DenseMatrix::hcat(&refs)?;
    let decomposition = svd(&concatenated, SvdMode::Thin)?;
    let basis = DenseMatrix::from_fn(n, m, |i, j| decomposition.left[(i, j)]);

    let mut subject_spectra = Vec::with_capacity(compressed.len());
    for block in &blocks_for_spectra {
        let projected = block.matmul_at_b(&basis); // cols x m
        let mut spectrum = Vec::with_capacity(m);
        for i in 0..m {
            let mut energy = 0.0;
            for r in 0..projected.rows() {
                let v = projected[(r, i)];
                energy += v * v;
            }
            spectrum.push(energy.max(0.0));
        }
        subject_spectra.push(spectrum);
    }

    Ok(SharedBasisModel {
        basis,
        subject_spectra,
        penalty: penalty.clone(),
        subject_samples: compressed.iter().map(|x| x.effective_samples()).collect(),
    })
}

/// The precision of subject `k` under the shared basis: the scalar map is
/// applied to the subject's spectrum, and the basis is mapped back through
/// the penalty weights. Columns with zero loading are kept so every
/// subject's factors stay aligned.
pub fn subject_precision(model: &SharedBasisModel, k: usize) -> Result<FactoredPrecision> {
    let spectrum = model.spectrum(k)?;
    let rho = model.penalty.rho();
    let c = 1.0 / rho.sqrt();
    let omega: Vec<f64> = spectrum
        .iter()
        .map(|&d| riccati_eigenvalue_map(d, rho).map(|p| p - c))
        .collect::<Result<_>>()?;
    let basis = model.penalty.unwhiten_basis(&model.basis)?;
    let baseline = model.penalty.folded_baseline(c, model.dim())?;
    FactoredPrecision::from_parts(basis, omega, baseline, rho, c, model.subject_samples[k])
}

/// Cosines of the principal angles between the column spans of two
/// orthonormal bases (the singular values of `A^T B`).
pub fn principal_angle_cosines(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    if a.rows() != b.rows() {
        return Err(Error::invalid("bases live in different dimensions"));
    }
    let cross = a.matmul_at_b(b);
    Ok(svd(&cross, SvdMode::Thin)?.singular_values)
}
