//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riccprec::ingest::{save_matrix, MatrixFormat};
use riccprec::matcore::{gram_schmidt, DenseMatrix};
use riccprec::rng::SplitMix64;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_riccprec"))
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch riccprec")
}

pub fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed ({}):\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process killed by signal")
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = SplitMix64::new(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.next_gaussian())
}

pub fn write_gaussian_csv(path: &Path, rows: usize, cols: usize, seed: u64) {
    save_matrix(path, &gaussian_matrix(rows, cols, seed), MatrixFormat::Csv).unwrap();
}

/// Matrix with singular spectrum `(i+1)^-decay` and orthonormal factors.
pub fn power_law_matrix(rows: usize, cols: usize, decay: f64, seed: u64) -> DenseMatrix {
    spectrum_matrix(rows, cols, seed, |i| ((i + 1) as f64).powf(-decay))
}

/// Power-law spectrum with a steep shoulder past `knee`, so the dominant
/// subspace a `knee`-dimensional sketch targets is well separated from the
/// residual tail.
pub fn shouldered_power_law(
    rows: usize,
    cols: usize,
    decay: f64,
    knee: usize,
    rate: f64,
    seed: u64,
) -> DenseMatrix {
    spectrum_matrix(rows, cols, seed, |i| {
        let mut s = ((i + 1) as f64).powf(-decay);
        if i + 1 > knee {
            s *= (-((i + 1 - knee) as f64) / rate).exp();
        }
        s
    })
}

fn spectrum_matrix(
    rows: usize,
    cols: usize,
    seed: u64,
    spectrum: impl Fn(usize) -> f64,
) -> DenseMatrix {
    assert!(rows <= cols);
    let mut rng = SplitMix64::new(seed);
    let u = gram_schmidt(&DenseMatrix::from_fn(rows, rows, |_, _| {
        rng.next_gaussian()
    }))
    .unwrap();
    let v = gram_schmidt(&DenseMatrix::from_fn(cols, rows, |_, _| {
        rng.next_gaussian()
    }))
    .unwrap();
    let mut scaled = DenseMatrix::zeros(rows, rows);
    for j in 0..rows {
        let s = spectrum(j);
        for i in 0..rows {
            scaled[(i, j)] = u[(i, j)] * s;
        }
    }
    scaled.matmul_a_bt(&v)
}

pub fn parse_csv_matrix(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| c.trim().parse::<f64>().unwrap())
                .collect()
        })
        .collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}
