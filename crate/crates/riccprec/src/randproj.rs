//! Randomized compression of the sample dimension.
//!
//! An N x T signal matrix is thinned to N x t by multiplying with an
//! orthonormal basis of the subspace spanned by `(X^T X)^q X^T G`, where G
//! is an N x t Gaussian test matrix. The basis lives in sample space (T x t);
//! the Gaussian matrix is internal and never exposed. Power iterations
//! (`q >= 1`) sharpen the captured spectrum at the cost of extra passes over
//! the data.
//!
//! The power product is built by alternating multiplications with
//! re-orthonormalization after every step; forming `(X^T X)^q` explicitly
//! would overflow for modest `q` whenever the spectrum is spread.

use crate::error::{Error, Result};
use crate::ingest::{DataMatrix, DataState};
use crate::matcore::{gram_schmidt, DenseMatrix};
use crate::rng::SplitMix64;

/// Parameters of one randomized projection.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionConfig {
    /// Target sample dimension, `1 <= t <= T`.
    pub target_dim: usize,
    /// Number of power iterations, `>= 0`.
    pub power_iterations: usize,
    pub seed: u64,
}

/// Result of [`random_project`]: the thinned data and the orthonormal basis
/// `W` (T x t) with `Y = X W`.
#[derive(Clone, Debug)]
pub struct Projection {
    pub data: DataMatrix,
    pub basis: DenseMatrix,
}

pub fn random_project(x: &DataMatrix, cfg: &ProjectionConfig) -> Result<Projection> {
    let t_full = x.samples();
    if cfg.target_dim == 0 || cfg.target_dim > t_full {
        return Err(Error::invalid(format!(
            "target dimension {} outside 1..={}",
            cfg.target_dim, t_full
        )));
    }
    if !x.matrix().is_finite() {
        return Err(Error::invalid(
            "projection input contains non-finite entries",
        ));
    }

    let mut rng = SplitMix64::stream(cfg.seed, 0);
    let gaussian = DenseMatrix::from_fn(x.signals(), cfg.target_dim, |_, _| rng.next_gaussian());

    // X^T G, then q rounds of X^T (X B), orthonormalizing after every product.
    let mut basis = gram_schmidt(&x.matrix().matmul_at_b(&gaussian))?;
    for _ in 0..cfg.power_iterations {
        let forward = gram_schmidt(&x.matrix().matmul(&basis))?;
        basis = gram_schmidt(&x.matrix().matmul_at_b(&forward))?;
    }

    let y = x.matrix().matmul(&basis);
    let data = DataMatrix::with_state(y, DataState::Projected, x.effective_samples());
    Ok(Projection { data, basis })
}

/// Fraction of squared Frobenius norm preserved by a projection,
/// `||Y||_F^2 / ||X||_F^2`.
pub fn retained_energy(x: &DataMatrix, y: &DataMatrix) -> Result<f64> {
    let denom = x.matrix().frobenius_norm();
    if denom == 0.0 {
        return Err(Error::invalid("retained_energy of a zero matrix"));
    }
    let num = y.matrix().frobenius_norm();
    Ok((num / denom) * (num / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{svd, SvdMode};

    fn gaussian_data(n: usize, t: usize, seed: u64) -> DataMatrix {
        let mut rng = SplitMix64::new(seed);
        DataMatrix::from_dense(DenseMatrix::from_fn(n, t, |_, _| rng.next_gaussian()))
    }

    /// Exact rank-r matrix built from thin Gaussian factors.
    fn low_rank_data(n: usize, t: usize, r: usize, seed: u64) -> DataMatrix {
        let mut rng = SplitMix64::new(seed);
        let g = DenseMatrix::from_fn(n, r, |_, _| rng.next_gaussian());
        let h = DenseMatrix::from_fn(r, t, |_, _| rng.next_gaussian());
        DataMatrix::from_dense(g.matmul(&h))
    }

    /// Synthetic matrix with singular values `(i+1)^-decay`.
    fn power_law_data(n: usize, t: usize, decay: f64, seed: u64) -> DataMatrix {
        let mut rng = SplitMix64::new(seed);
        let u = gram_schmidt(&DenseMatrix::from_fn(n, n, |_, _| rng.next_gaussian())).unwrap();
        let v = gram_schmidt(&DenseMatrix::from_fn(t, n, |_, _| rng.next_gaussian())).unwrap();
        let mut scaled = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let s = ((j + 1) as f64).powf(-decay);
            for i in 0..n {
                scaled[(i, j)] = u[(i, j)] * s;
            }
        }
        DataMatrix::from_dense(scaled.matmul_a_bt(&v))
    }

    #[test]
    fn full_dimension_preserves_frobenius_norm() {
        // needs N >= T so the row space spans all T sample directions
        let x = gaussian_data(30, 20, 1);
        let cfg = ProjectionConfig {
            target_dim: 20,
            power_iterations: 0,
            seed: 9,
        };
        let proj = random_project(&x, &cfg).unwrap();
        let e = retained_energy(&x, &proj.data).unwrap();
        assert!((e - 1.0).abs() < 1e-9, "energy {e}");
    }

    #[test]
    fn exact_rank_is_captured() {
        let x = low_rank_data(30, 200, 10, 3);
        let cfg = ProjectionConfig {
            target_dim: 10,
            power_iterations: 1,
            seed: 4,
        };
        let proj = random_project(&x, &cfg).unwrap();
        let e = retained_energy(&x, &proj.data).unwrap();
        assert!(e >= 0.999, "energy {e}");
        assert!(e <= 1.0 + 1e-12);
    }

    #[test]
    fn power_law_spectrum_matches_within_five_percent() {
        let x = power_law_data(40, 200, 0.8, 5);
        let t = 40; // 0.2 * T
        let cfg = ProjectionConfig {
            target_dim: t,
            power_iterations: 3,
            seed: 11,
        };
        let proj = random_project(&x, &cfg).unwrap();
        let sx = svd(x.matrix(), SvdMode::Thin).unwrap().singular_values;
        let sy = svd(proj.data.matrix(), SvdMode::Thin)
            .unwrap()
            .singular_values;
        for i in 0..t {
            assert!(
                (sy[i] - sx[i]).abs() <= 0.05 * sx[i],
                "singular value {i}: {} vs {}",
                sy[i],
                sx[i]
            );
        }
    }

    #[test]
    fn interlacing_of_singular_values() {
        let x = gaussian_data(15, 60, 21);
        let cfg = ProjectionConfig {
            target_dim: 12,
            power_iterations: 0,
            seed: 2,
        };
        let proj = random_project(&x, &cfg).unwrap();
        let sx = svd(x.matrix(), SvdMode::Thin).unwrap().singular_values;
        let sy = svd(proj.data.matrix(), SvdMode::Thin)
            .unwrap()
            .singular_values;
        for i in 0..sy.len() {
            assert!(sy[i] <= sx[i] + 1e-9, "index {i}: {} > {}", sy[i], sx[i]);
        }
    }

    #[test]
    fn energy_monotone_in_power_iterations_statistically() {
        let x = power_law_data(30, 150, 0.6, 77);
        let mut violations = 0;
        for seed in 0..20u64 {
            let energies: Vec<f64> = [0usize, 1, 3]
                .iter()
                .map(|&q| {
                    let cfg = ProjectionConfig {
                        target_dim: 10,
                        power_iterations: q,
                        seed,
                    };
                    let proj = random_project(&x, &cfg).unwrap();
                    retained_energy(&x, &proj.data).unwrap()
                })
                .collect();
            if energies[1] < energies[0] || energies[2] < energies[1] {
                violations += 1;
            }
        }
        assert!(violations <= 2, "{violations} monotonicity violations");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let x = gaussian_data(12, 40, 6);
        let cfg = ProjectionConfig {
            target_dim: 8,
            power_iterations: 2,
            seed: 123,
        };
        let a = random_project(&x, &cfg).unwrap();
        let b = random_project(&x, &cfg).unwrap();
        assert_eq!(a.data.matrix().values(), b.data.matrix().values());
        assert_eq!(a.basis.values(), b.basis.values());
    }

    #[test]
    fn rejects_oversized_target() {
        let x = gaussian_data(5, 10, 1);
        let cfg = ProjectionConfig {
            target_dim: 11,
            power_iterations: 0,
            seed: 0,
        };
        assert!(matches!(
            random_project(&x, &cfg),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn rank_collapse_is_reported() {
        // rank-2 data, t = 4: the sketch cannot span 4 dimensions
        let x = low_rank_data(10, 30, 2, 9);
        let cfg = ProjectionConfig {
            target_dim: 4,
            power_iterations: 1,
            seed: 5,
        };
        match random_project(&x, &cfg) {
            Err(Error::RankDeficient { .. }) => {}
            other => panic!("expected rank collapse, got {other:?}"),
        }
    }

    #[test]
    fn zero_matrix_energy_rejected() {
        let x = DataMatrix::from_dense(DenseMatrix::zeros(3, 5));
        let y = DataMatrix::from_dense(DenseMatrix::zeros(3, 2));
        assert!(matches!(
            retained_energy(&x, &y),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn projected_energy_of_zero_columns_is_zero() {
        let x = gaussian_data(4, 9, 30);
        let y = DataMatrix::from_dense(DenseMatrix::zeros(4, 3));
        let e = retained_energy(&x, &y).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn basis_is_orthonormal_and_consistent() {
        let x = gaussian_data(9, 25, 17);
        let cfg = ProjectionConfig {
            target_dim: 6,
            power_iterations: 1,
            seed: 31,
        };
        let proj = random_project(&x, &cfg).unwrap();
        let g = proj.basis.matmul_at_b(&proj.basis);
        assert!(g.sub(&DenseMatrix::identity(6)).max_abs() < 1e-10);
        let y = x.matrix().matmul(&proj.basis);
        assert_eq!(y.values(), proj.data.matrix().values());
        assert_eq!(proj.data.effective_samples(), 25);
        assert_eq!(proj.data.state(), DataState::Projected);
    }
}
