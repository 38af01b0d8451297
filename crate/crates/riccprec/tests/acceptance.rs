//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Tolerances and runtime budgets
//! are asserted here, not just observed.

mod common;

use common::*;

use std::fs;
use std::io::Write as _;
use std::time::Instant;

use riccprec::analysis::{partial_correlations, tsee_direct, tsee_fast, NetworkSelection};
use riccprec::ingest::{normalize, save_matrix, DataMatrix, MatrixFormat};
use riccprec::matcore::{gram_schmidt, svd, DenseMatrix, SvdMode};
use riccprec::randproj::{random_project, retained_energy, ProjectionConfig};
use riccprec::riccati::{
    estimate, riccati_eigenvalue_map, stationarity_residual, Baseline, FactoredPrecision,
    PenaltyShape,
};
use riccprec::rng::SplitMix64;
use riccprec::shared::{fit_shared, subject_precision, JsvdOptions};
use riccprec::validation::{
    edge_icc, icc_c1, split_sample_sweep, Cohort, DimensionSpec, EstimationMethod, SplitPlan,
    Subject, SweepGrid,
};

fn normalized_gaussian(n: usize, t: usize, seed: u64) -> DataMatrix {
    normalize(&DataMatrix::from_dense(gaussian_matrix(n, t, seed))).unwrap()
}

/// Criterion 1: the densified estimate satisfies the stationarity equation
/// `Q^{-1} - C - rho V^T V Q V^T V = 0` within 1e-7 * (1 + ||C||_F) for 200
/// random instances across all penalty kinds and rho in
/// {0.1, 0.25, 0.5, 1, 100}, in under two minutes.
#[test]
fn acceptance_01_stationarity_suite() {
    let started = Instant::now();
    let rhos = [0.1, 0.25, 0.5, 1.0, 100.0];
    let mut rng = SplitMix64::new(0xACC1);
    let mut count = 0usize;
    let mut worst_ratio = 0.0f64;
    while count < 200 {
        for &rho in &rhos {
            for kind in 0..3usize {
                if count >= 200 {
                    break;
                }
                // general weights stay small so the dense baseline is cheap
                let n = match kind {
                    2 => 10 + (rng.next_below(51) as usize),
                    _ => 20 + (rng.next_below(181) as usize),
                };
                let t = 30 + (rng.next_below((500 - 30) as u64 + 1) as usize);
                let x = normalized_gaussian(n, t, rng.next_u64());
                let penalty = match kind {
                    0 => PenaltyShape::scaled_identity([1.0, 1.5][count % 2], rho).unwrap(),
                    1 => {
                        let weights: Vec<f64> =
                            (0..n).map(|_| 0.5 + 1.5 * rng.next_f64()).collect();
                        PenaltyShape::diagonal(weights, rho).unwrap()
                    }
                    _ => {
                        let mut v = DenseMatrix::from_fn(n, n, |_, _| 0.25 * rng.next_gaussian());
                        for i in 0..n {
                            v[(i, i)] += 2.0;
                        }
                        PenaltyShape::general(v, rho).unwrap()
                    }
                };
                let c = x.covariance().unwrap();
                let q = estimate(&x, &penalty).unwrap().densify().unwrap();
                let residual = stationarity_residual(&q, &c, &penalty).unwrap();
                let tol = 1e-7 * (1.0 + c.frobenius_norm());
                assert!(
                    residual <= tol,
                    "instance {count}: residual {residual:.3e} > {tol:.3e} (n={n}, rho={rho})"
                );
                worst_ratio = worst_ratio.max(residual / tol);
                count += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "stationarity suite took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 01 stationarity-suite: PASS (200 instances, worst residual at {:.1}% of tolerance, {:.1}s)",
        100.0 * worst_ratio,
        elapsed.as_secs_f64()
    );
}

/// Criterion 2: the scalar map matches the positive root of
/// `rho p^2 + d p - 1 = 0` to 1e-12 relative on a 10,000-point grid, in
/// under a second.
#[test]
fn acceptance_02_scalar_oracle_grid() {
    let started = Instant::now();
    let mut checked = 0usize;
    for i in 0..100usize {
        // d spans 0 .. ~1e4 with dense coverage near 0
        let d = if i < 50 {
            i as f64 * 0.04
        } else {
            2.0 * 1.2f64.powi(i as i32 - 50)
        };
        for j in 0..100usize {
            let rho = 1e-3 * 1.15f64.powi(j as i32);
            let p = riccati_eigenvalue_map(d, rho).unwrap();

            // oracle A: one Newton polish step on f(p) = rho p^2 + d p - 1;
            // if p is the root to 1e-12 relative the step cannot move it
            let f = rho * p * p + d * p - 1.0;
            let fp = 2.0 * rho * p + d;
            let polished = p - f / fp;
            assert!(
                (polished - p).abs() <= 1e-12 * p,
                "newton moved p at d={d}, rho={rho}: {p} -> {polished}"
            );

            // oracle B: textbook quadratic root, compared where it is
            // numerically trustworthy (no catastrophic cancellation)
            if d * d <= 100.0 * rho {
                let root = (-d + (d * d + 4.0 * rho).sqrt()) / (2.0 * rho);
                assert!(
                    (root - p).abs() <= 1e-12 * root.max(p),
                    "quadratic root mismatch at d={d}, rho={rho}"
                );
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 10_000);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "grid took {elapsed:?}");
    println!(
        "ACCEPTANCE 02 scalar-oracle: PASS (10000 grid points, {:.3}s)",
        elapsed.as_secs_f64()
    );
}

/// Criterion 3: fast and direct entropy agree within
/// 1e-8 * (1 + |direct|) over 500 randomized configurations including
/// alpha in {1, 10, 100}, in under a minute.
#[test]
fn acceptance_03_fast_entropy_equivalence() {
    let started = Instant::now();
    let mut rng = SplitMix64::new(0xACC3);
    let rhos = [0.1, 0.25, 0.5, 1.0, 100.0];
    let alphas = [1.0, 10.0, 100.0];
    for case in 0..500usize {
        let n_nodes = 8 + (rng.next_below(93) as usize); // <= 100
        let rho = rhos[case % rhos.len()];
        let alpha = alphas[(case / rhos.len()) % alphas.len()];

        let q = if case % 5 == 4 {
            // synthetic sign-indefinite factors, baseline large enough to
            // keep the matrix positive definite
            let m = 1 + (rng.next_below(30) as usize);
            let basis = DenseMatrix::from_fn(n_nodes, m, |_, _| rng.next_gaussian());
            let omega: Vec<f64> = (0..m).map(|_| rng.next_gaussian() * 0.1).collect();
            let gram = basis.matmul_at_b(&basis);
            let bound: f64 = omega
                .iter()
                .enumerate()
                .map(|(k, om)| om.abs() * gram[(k, k)])
                .sum();
            FactoredPrecision::from_parts(
                basis,
                omega,
                Baseline::Scalar(bound + 0.5),
                rho,
                1.0 / rho.sqrt(),
                50,
            )
            .unwrap()
        } else {
            let t = n_nodes + 10 + (rng.next_below(80) as usize);
            let x = normalized_gaussian(n_nodes, t, rng.next_u64());
            let m_target = 1 + (rng.next_below(n_nodes.min(t) as u64) as usize);
            let data = if m_target < n_nodes.min(t) && case % 3 == 0 {
                random_project(
                    &x,
                    &ProjectionConfig {
                        target_dim: m_target,
                        power_iterations: 1,
                        seed: rng.next_u64(),
                    },
                )
                .unwrap()
                .data
            } else {
                x
            };
            estimate(&data, &PenaltyShape::scaled_identity(alpha, rho).unwrap()).unwrap()
        };

        let net_size = 2 + (rng.next_below((n_nodes - 1) as u64) as usize);
        let mut picks: Vec<usize> = (0..n_nodes).collect();
        rng.shuffle(&mut picks);
        picks.truncate(net_size);
        let net = NetworkSelection::new(picks).unwrap();

        let dense = q.densify().unwrap().principal_submatrix(net.indices());
        let direct = tsee_direct(&dense).unwrap();
        let fast = tsee_fast(&q, &net).unwrap();
        assert!(
            (fast - direct).abs() <= 1e-8 * (1.0 + direct.abs()),
            "case {case}: fast {fast} vs direct {direct} (n={n_nodes}, rho={rho}, alpha={alpha})"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "entropy grid took {elapsed:?}"
    );
    println!(
        "ACCEPTANCE 03 fast-entropy-equivalence: PASS (500 configurations, {:.1}s)",
        elapsed.as_secs_f64()
    );
}

/// Criterion 4: on 360 x 4000 data with a power-law spectrum, a q=3
/// projection to t=200 keeps each of the top 200 singular values within 5%
/// and at least 95% of the energy; without power iterations the energy is
/// strictly lower on at least 18 of 20 seeds.
#[test]
fn acceptance_04_projection_quality() {
    // power-law spectrum with a steep shoulder past the sketch dimension:
    // with zero oversampling a sketch cannot pin the boundary singular
    // value against a tail of comparable size, so the separation has to be
    // in the data (smooth-signal recordings put it there too)
    let x_dense = shouldered_power_law(360, 4000, 0.7, 200, 2.0, 0xACC4);
    let x = DataMatrix::from_dense(x_dense);

    // construction cross-check: the factors are orthonormal, so the
    // spectrum of X must match the planted values
    let sx = svd(x.matrix(), SvdMode::Thin).unwrap().singular_values;
    for (i, &s) in sx.iter().enumerate().take(200) {
        let planted = ((i + 1) as f64).powf(-0.7);
        assert!(
            (s - planted).abs() <= 1e-8 * planted,
            "construction spectrum off at {i}: {s} vs {planted}"
        );
    }

    let projection = random_project(
        &x,
        &ProjectionConfig {
            target_dim: 200,
            power_iterations: 3,
            seed: 1,
        },
    )
    .unwrap();
    let energy = retained_energy(&x, &projection.data).unwrap();
    assert!(energy >= 0.95, "retained energy {energy} < 0.95");

    let sy = svd(projection.data.matrix(), SvdMode::Thin)
        .unwrap()
        .singular_values;
    for i in 0..200 {
        assert!(
            (sy[i] - sx[i]).abs() <= 0.05 * sx[i],
            "singular value {i}: projected {} vs full {}",
            sy[i],
            sx[i]
        );
        // interlacing: compression cannot raise a singular value
        assert!(sy[i] <= sx[i] + 1e-9 * sx[0]);
    }

    let mut q0_lower = 0usize;
    for seed in 0..20u64 {
        let energy_at = |q: usize| {
            let proj = random_project(
                &x,
                &ProjectionConfig {
                    target_dim: 200,
                    power_iterations: q,
                    seed: 1000 + seed,
                },
            )
            .unwrap();
            retained_energy(&x, &proj.data).unwrap()
        };
        if energy_at(0) < energy_at(3) {
            q0_lower += 1;
        }
    }
    assert!(
        q0_lower >= 18,
        "q=0 energy lower on only {q0_lower} of 20 seeds"
    );
    println!(
        "ACCEPTANCE 04 projection-quality: PASS (energy {energy:.4}, q0<q3 on {q0_lower}/20 seeds)"
    );
}

/// Criterion 5: on a synthetic cohort with a planted rank-10 shared
/// covariance, the mean held-out NLL over 100 splits is minimized at
/// dimension 10 (within one grid step) on the axis {5, 10, 25, 50, full},
/// in under ten minutes.
#[test]
fn acceptance_05_split_sample_optimum() {
    let started = Instant::now();
    // Sample-starved covariance regime, like per-subject structural maps:
    // each subject contributes two columns, so a 50-subject group carries
    // 100 samples against 120 nodes. The true covariance is rank 10 plus a
    // small noise floor; dimensions past 10 fit sampling fluctuation that
    // does not generalize.
    let n = 120;
    let planted_rank = 10;
    let mut rng = SplitMix64::new(0xACC5);
    let basis = gram_schmidt(&DenseMatrix::from_fn(n, planted_rank, |_, _| {
        rng.next_gaussian()
    }))
    .unwrap();
    let scales: Vec<f64> = (0..planted_rank)
        .map(|i| (8.0 - 0.6 * i as f64).sqrt())
        .collect();
    let subjects: Vec<Subject> = (0..100)
        .map(|k| {
            let t = 2;
            let mut srng = SplitMix64::stream(0xACC5 ^ 0x55AA, k as u64);
            let loadings =
                DenseMatrix::from_fn(planted_rank, t, |i, _| scales[i] * srng.next_gaussian());
            let noise = DenseMatrix::from_fn(n, t, |_, _| 0.3 * srng.next_gaussian());
            let data = basis.matmul(&loadings).add(&noise);
            Subject {
                id: format!("subject{k}"),
                scans: vec![DataMatrix::from_dense(data)],
            }
        })
        .collect();
    let cohort = Cohort::new(subjects).unwrap();
    let plan = SplitPlan {
        n_repetitions: 100,
        group_size: 50,
        seed: 20,
    };
    let dims = [
        DimensionSpec::Projected(5),
        DimensionSpec::Projected(10),
        DimensionSpec::Projected(25),
        DimensionSpec::Projected(50),
        DimensionSpec::Full,
    ];
    let grid = SweepGrid {
        dimensions: dims.to_vec(),
        rhos: vec![0.5],
        alphas: vec![1.0],
        methods: vec![EstimationMethod::Riccati],
        network: None,
        power_iterations: 1,
    };
    let report = split_sample_sweep(&cohort, &plan, &grid).unwrap();
    assert_eq!(report.cells.len(), dims.len());
    let mut means = Vec::new();
    for (key, cell) in &report.cells {
        assert_eq!(cell.n_failed(), 0, "failed repetitions in {key:?}");
        means.push((key.dimension, cell.mean().unwrap()));
    }
    // order the means along the declared axis, full last
    means.sort_by_key(|(d, _)| match d {
        DimensionSpec::Projected(t) => *t,
        DimensionSpec::Full => usize::MAX,
    });
    let argmin = means
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap()
        .0;
    let labels: Vec<String> = means.iter().map(|(d, m)| format!("{d}:{m:.3}")).collect();
    // dimension 10 sits at axis index 1; one grid step of slack each way
    assert!(
        argmin <= 2,
        "NLL minimized at axis index {argmin}, means {labels:?}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "sweep took {elapsed:?}");
    println!(
        "ACCEPTANCE 05 split-sample-optimum: PASS (means {labels:?}, argmin index {argmin}, {:.1}s)",
        elapsed.as_secs_f64()
    );
}

/// Criterion 6: with subject-specific spectra on a shared basis, the joint
/// decomposition yields partial-correlation edge ICC at least 0.05 above
/// independent per-scan estimation, averaged over 20 cohorts.
#[test]
fn acceptance_06_jsvd_specificity() {
    let n = 30;
    let m0 = 6;
    let subjects_per_cohort = 20;
    let reps = 2;
    let t = 150;
    let rho = 0.25;
    let mut gaps = Vec::new();
    for cohort_idx in 0..20u64 {
        let mut rng = SplitMix64::stream(0xACC6, cohort_idx);
        let basis = gram_schmidt(&DenseMatrix::from_fn(n, m0, |_, _| rng.next_gaussian())).unwrap();
        // persistent per-subject loadings, redrawn per scan only in the
        // sample dimension
        let mut scans: Vec<Vec<DataMatrix>> = Vec::new();
        for _ in 0..subjects_per_cohort {
            let spectrum: Vec<f64> = (0..m0)
                .map(|i| (4.0 - 0.4 * i as f64) * (0.7 + 0.6 * rng.next_f64()))
                .collect();
            let mut subject_scans = Vec::new();
            for _ in 0..reps {
                let loadings =
                    DenseMatrix::from_fn(m0, t, |i, _| spectrum[i].sqrt() * rng.next_gaussian());
                let noise = DenseMatrix::from_fn(n, t, |_, _| 0.6 * rng.next_gaussian());
                let data = basis.matmul(&loadings).add(&noise);
                subject_scans.push(normalize(&DataMatrix::from_dense(data)).unwrap());
            }
            scans.push(subject_scans);
        }
        let flat: Vec<DataMatrix> = scans.iter().flatten().cloned().collect();

        // joint route: one basis for every scan, per-scan spectra
        let penalty = PenaltyShape::identity(rho).unwrap();
        let model = fit_shared(&flat, m0, &penalty, &JsvdOptions::default()).unwrap();
        let jsvd_partials: Vec<Vec<DenseMatrix>> = (0..subjects_per_cohort)
            .map(|k| {
                (0..reps)
                    .map(|r| {
                        let q = subject_precision(&model, k * reps + r).unwrap();
                        partial_correlations(&q.densify().unwrap()).unwrap()
                    })
                    .collect()
            })
            .collect();

        // independent route: per-scan randomized compression to the same
        // dimension, separate bases
        let indep_partials: Vec<Vec<DenseMatrix>> = scans
            .iter()
            .enumerate()
            .map(|(k, subject_scans)| {
                subject_scans
                    .iter()
                    .enumerate()
                    .map(|(r, x)| {
                        let proj = random_project(
                            x,
                            &ProjectionConfig {
                                target_dim: m0,
                                power_iterations: 1,
                                seed: SplitMix64::stream(cohort_idx, (k * reps + r) as u64)
                                    .next_u64(),
                            },
                        )
                        .unwrap();
                        let q = estimate(&proj.data, &penalty).unwrap();
                        partial_correlations(&q.densify().unwrap()).unwrap()
                    })
                    .collect()
            })
            .collect();

        let jsvd_icc = edge_icc(&jsvd_partials).unwrap().mean_icc;
        let indep_icc = edge_icc(&indep_partials).unwrap().mean_icc;
        gaps.push(jsvd_icc - indep_icc);
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(
        mean_gap >= 0.05,
        "mean edge-ICC advantage {mean_gap:.4} below 0.05 (gaps {gaps:?})"
    );
    println!("ACCEPTANCE 06 jsvd-specificity: PASS (mean edge-ICC gap {mean_gap:.3})");
}

/// Criterion 7: raising the out-of-network suppression alpha through
/// {10, 100, 1000} pulls the network restriction of the precision
/// monotonically toward the network-only estimate, on 50 random instances.
#[test]
fn acceptance_07_roi_suppression() {
    let mut rng = SplitMix64::new(0xACC7);
    for instance in 0..50usize {
        let n = 16 + (rng.next_below(25) as usize);
        let t = 100 + (rng.next_below(100) as usize);
        let rho = [0.25, 0.5, 1.0][instance % 3];
        let x = normalized_gaussian(n, t, rng.next_u64());
        let net_size = 4 + (rng.next_below(5) as usize);
        let mut picks: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut picks);
        picks.truncate(net_size);
        picks.sort_unstable();

        // network-only oracle: estimate on the selected rows alone (rows of
        // a normalized matrix are themselves normalized)
        let isolated = estimate(
            &DataMatrix::from_dense(x.matrix().select_rows(&picks)),
            &PenaltyShape::identity(rho).unwrap(),
        )
        .unwrap()
        .densify()
        .unwrap();

        let mut previous = f64::INFINITY;
        for alpha in [10.0, 100.0, 1000.0] {
            let q = estimate(&x, &PenaltyShape::roi(n, &picks, alpha, rho).unwrap()).unwrap();
            let restricted = q.densify().unwrap().principal_submatrix(&picks);
            let gap = restricted.sub(&isolated).frobenius_norm();
            assert!(
                gap < previous,
                "instance {instance}: gap {gap:.3e} did not shrink at alpha {alpha}"
            );
            previous = gap;
        }
    }
    println!("ACCEPTANCE 07 roi-suppression: PASS (50 instances, monotone in alpha)");
}

/// Criterion 8: a 50,000-node input projected to t=7 estimates in under a
/// minute and under 4 GB on one core, and the dense path refuses it.
#[test]
fn acceptance_08_scale_check() {
    let dir = tempfile::tempdir().unwrap();
    let n: usize = 50_000;
    let t: usize = 400;
    let input = dir.path().join("big.raw64");

    // stream the fixture to disk row by row
    {
        let file = fs::File::create(&input).unwrap();
        let mut w = std::io::BufWriter::with_capacity(1 << 20, file);
        w.write_all(b"RPMAT64\0").unwrap();
        w.write_all(&(n as u64).to_le_bytes()).unwrap();
        w.write_all(&(t as u64).to_le_bytes()).unwrap();
        let mut rng = SplitMix64::new(0xACC8);
        for _ in 0..n {
            for _ in 0..t {
                w.write_all(&rng.next_gaussian().to_le_bytes()).unwrap();
            }
        }
        w.flush().unwrap();
    }

    let output = dir.path().join("big.fprec");
    let started = Instant::now();
    let out = run_in(
        dir.path(),
        &[
            "estimate",
            "--input",
            "big.raw64",
            "--rho",
            "100",
            "--penalty",
            "identity",
            "--project-t",
            "7",
            "--project-q",
            "1",
            "--seed",
            "8",
            "--output",
            "big.fprec",
        ],
    );
    let elapsed = started.elapsed();
    assert_ok(&out);
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "estimation took {elapsed:?}, budget is 60s"
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("N=50000"), "stdout: {stdout}");
    let rank: usize = stdout
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("m="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rank <= 7, "rank {rank} exceeds projection dimension");

    // peak resident memory of the child, via getrusage(RUSAGE_CHILDREN);
    // ru_maxrss is in kilobytes on Linux
    let mut usage = unsafe { std::mem::zeroed::<libc::rusage>() };
    let rc = unsafe { libc::getrusage(libc::RUSAGE_CHILDREN, &mut usage) };
    assert_eq!(rc, 0);
    let peak_bytes = usage.ru_maxrss as u64 * 1024;
    assert!(
        peak_bytes < 4 * 1024 * 1024 * 1024,
        "peak child memory {} MB exceeds 4 GB",
        peak_bytes / (1024 * 1024)
    );

    // no dense N x N path exists at this size: the cap refuses it
    let densify_out = run_in(
        dir.path(),
        &[
            "densify",
            "--precision",
            "big.fprec",
            "--output",
            "dense.csv",
        ],
    );
    assert_eq!(exit_code(&densify_out), 3);
    assert!(!dir.path().join("dense.csv").exists());
    assert!(output.exists());
    println!(
        "ACCEPTANCE 08 scale-check: PASS ({:.1}s, peak {} MB, m={rank})",
        elapsed.as_secs_f64(),
        peak_bytes / (1024 * 1024)
    );
}

/// Criterion 9: the ICC implementation matches hand-worked two-way ANOVA
/// tables to 1e-10 and is centered under the null (mean |ICC| < 0.05 over
/// 100 seeds at n=200, k=4).
#[test]
fn acceptance_09_icc_correctness() {
    // Table 1: grand 3.75; row means 1.5, 4, 6.5, 3; column means 3, 4.5.
    // SS_rows = 2(5.0625 + 0.0625 + 7.5625 + 0.5625) = 26.5, SS_err = 0.5,
    // MS_rows = 26.5/3, MS_err = 0.5/3 -> ICC = (26.5-0.5)/(26.5+0.5) = 26/27.
    let table1 = DenseMatrix::from_rows(&[
        vec![1.0, 2.0],
        vec![3.0, 5.0],
        vec![6.0, 7.0],
        vec![2.0, 4.0],
    ])
    .unwrap();
    assert!((icc_c1(&table1).unwrap() - 26.0 / 27.0).abs() < 1e-10);

    // Table 2: grand 37/6; row means 5.5, 10.5, 2.5; column means 17/3, 20/3.
    // SS_rows = 2((2/3)^2 + (13/3)^2 + (11/3)^2) = 588/9, SS_err = 4,
    // MS_rows = 294/9, MS_err = 2 -> ICC = (294-18)/(294+18) = 23/26.
    let table2 =
        DenseMatrix::from_rows(&[vec![5.0, 6.0], vec![9.0, 12.0], vec![3.0, 2.0]]).unwrap();
    assert!((icc_c1(&table2).unwrap() - 23.0 / 26.0).abs() < 1e-10);

    let mut total_abs = 0.0;
    for seed in 0..100u64 {
        let mut rng = SplitMix64::new(0xACC9 + seed);
        let ratings = DenseMatrix::from_fn(200, 4, |_, _| rng.next_gaussian());
        total_abs += icc_c1(&ratings).unwrap().abs();
    }
    let mean_abs = total_abs / 100.0;
    assert!(mean_abs < 0.05, "null mean |ICC| = {mean_abs}");
    println!(
        "ACCEPTANCE 09 icc-correctness: PASS (hand tables exact, null mean |ICC| {mean_abs:.4})"
    );
}

/// Criterion 10: every CLI command, re-run with the same seed and config,
/// produces byte-identical outputs.
#[test]
fn acceptance_10_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // shared fixtures
    write_gaussian_csv(&root.join("a.csv"), 8, 60, 1);
    write_gaussian_csv(&root.join("b.csv"), 8, 60, 2);
    fs::write(root.join("net.txt"), "1\n3\n5\n").unwrap();
    fs::write(root.join("ratings.csv"), "1,2\n3,5\n6,7\n2,4\n").unwrap();
    let maps = gaussian_matrix(8, 3, 9);
    save_matrix(&root.join("ma.csv"), &maps, MatrixFormat::Csv).unwrap();
    save_matrix(
        &root.join("mb.csv"),
        &gaussian_matrix(8, 3, 10),
        MatrixFormat::Csv,
    )
    .unwrap();
    let manifest: String = (0..6)
        .map(|k| {
            write_gaussian_csv(&root.join(format!("s{k}.csv")), 6, 30, 50 + k as u64);
            format!("subj{k},s{k}.csv\n")
        })
        .collect();
    fs::write(root.join("cohort.txt"), manifest).unwrap();

    // run every command once per tag and compare the produced bytes
    let run_all = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let q = format!("q_{tag}.fprec");
        let commands: Vec<Vec<String>> = vec![
            vec![
                "project",
                "a.csv",
                "--t",
                "5",
                "--q",
                "2",
                "--seed",
                "7",
                "--output",
                &format!("y_{tag}.raw64"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "estimate",
                "--input",
                "a.csv",
                "--rho",
                "0.5",
                "--penalty",
                "identity",
                "--project-t",
                "5",
                "--project-q",
                "1",
                "--seed",
                "3",
                "--output",
                &q,
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "tsee",
                "--precision",
                &q,
                "--network",
                "net.txt",
                "--output",
                &format!("tsee_{tag}.txt"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "partials",
                "--precision",
                &q,
                "--output",
                &format!("p_{tag}.csv"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "jsvd",
                "a.csv",
                "b.csv",
                "--m",
                "4",
                "--rho",
                "0.5",
                "--output-model",
                &format!("model_{tag}.bin"),
                "--output-dir",
                &format!("precs_{tag}"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "validate",
                "--manifest",
                "cohort.txt",
                "--repetitions",
                "3",
                "--group-size",
                "3",
                "--seed",
                "17",
                "--dimensions",
                "4,full",
                "--rhos",
                "0.5",
                "--methods",
                "riccati,tikhonov",
                "--output-csv",
                &format!("report_{tag}.csv"),
                "--output-json",
                &format!("report_{tag}.json"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "icc",
                "--ratings",
                "ratings.csv",
                "--output",
                &format!("icc_{tag}.txt"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "distance",
                "--precision",
                &q,
                "--maps-a",
                "ma.csv",
                "--maps-b",
                "mb.csv",
                "--output",
                &format!("d_{tag}.csv"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![
                "densify",
                "--precision",
                &q,
                "--output",
                &format!("dense_{tag}.csv"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ];
        for args in &commands {
            let argv: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
            assert_ok(&run_in(root, &argv));
        }
        let outputs = [
            format!("y_{tag}.raw64"),
            format!("y_{tag}.raw64.stats"),
            q.clone(),
            format!("tsee_{tag}.txt"),
            format!("p_{tag}.csv"),
            format!("model_{tag}.bin"),
            format!("precs_{tag}/000_a.fprec"),
            format!("precs_{tag}/001_b.fprec"),
            format!("report_{tag}.csv"),
            format!("report_{tag}.json"),
            format!("icc_{tag}.txt"),
            format!("d_{tag}.csv"),
            format!("dense_{tag}.csv"),
        ];
        outputs
            .iter()
            .map(|name| {
                let bytes = fs::read(root.join(name))
                    .unwrap_or_else(|e| panic!("missing output {name}: {e}"));
                (name.replace(&format!("_{tag}"), ""), bytes)
            })
            .collect()
    };

    let first = run_all("one");
    let second = run_all("two");
    assert_eq!(first.len(), second.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b);
        assert_eq!(
            bytes_a, bytes_b,
            "output {name_a} differs between identical runs"
        );
    }
    println!(
        "ACCEPTANCE 10 cli-determinism: PASS ({} outputs byte-identical across reruns)",
        first.len()
    );
}
