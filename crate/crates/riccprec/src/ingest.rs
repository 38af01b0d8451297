//! Data loading, normalization, outlier clamping and parcel averaging.
//!
//! Variance uses the `1/T` convention everywhere (matching the covariance
//! `C = (1/T) X X^T`), not `1/(T-1)`; many toolchains default to the latter,
//! so this is worth keeping in mind when cross-checking values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcore::{covariance_scaled, DenseMatrix};

/// Magic prefix of the binary matrix format.
pub const RAW64_MAGIC: &[u8; 8] = b"RPMAT64\0";

/// Default outlier threshold in median absolute deviations; the robust
/// counterpart of clipping a Gaussian at three standard deviations.
pub const DEFAULT_MAD_K: f64 = 4.4478;

/// Provenance of a [`DataMatrix`], tracked so estimators can tell whether
/// row statistics are meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataState {
    /// As loaded; rows carry no statistical guarantees.
    Raw,
    /// Rows have zero mean and unit variance (1/T convention).
    Normalized,
    /// Columns were compressed by an orthonormal basis; row statistics no
    /// longer hold, but the matrix descends from normalized data.
    Projected,
}

/// An N x T matrix of N signals over T samples, plus normalization state.
#[derive(Clone, Debug)]
pub struct DataMatrix {
    matrix: DenseMatrix,
    state: DataState,
    /// Sample count used in covariance scaling. Equal to `cols()` until a
    /// projection shrinks the sample dimension, after which it keeps the
    /// source sample count.
    effective_samples: usize,
    row_labels: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn from_dense(matrix: DenseMatrix) -> Self {
        let effective_samples = matrix.cols();
        Self {
            matrix,
            state: DataState::Raw,
            effective_samples,
            row_labels: None,
        }
    }

    pub(crate) fn with_state(
        matrix: DenseMatrix,
        state: DataState,
        effective_samples: usize,
    ) -> Self {
        Self {
            matrix,
            state,
            effective_samples,
            row_labels: None,
        }
    }

    #[inline]
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    #[inline]
    pub fn signals(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn samples(&self) -> usize {
        self.matrix.cols()
    }

    #[inline]
    pub fn state(&self) -> DataState {
        self.state
    }

    #[inline]
    pub fn effective_samples(&self) -> usize {
        self.effective_samples
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.signals() {
            return Err(Error::invalid("label count does not match row count"));
        }
        self.row_labels = Some(labels);
        Ok(self)
    }

    /// Sample covariance with the matrix's effective sample count.
    pub fn covariance(&self) -> Result<DenseMatrix> {
        covariance_scaled(&self.matrix, self.effective_samples)
    }

    /// Drops the first `count` columns (initial samples affected by upstream
    /// filtering).
    pub fn trim_initial_samples(&self, count: usize) -> Result<DataMatrix> {
        if count >= self.samples() {
            return Err(Error::invalid(format!(
                "cannot trim {count} of {} samples",
                self.samples()
            )));
        }
        let t = self.samples() - count;
        let m = DenseMatrix::from_fn(self.signals(), t, |i, j| self.matrix[(i, j + count)]);
        Ok(DataMatrix {
            matrix: m,
            state: DataState::Raw,
            effective_samples: t,
            row_labels: self.row_labels.clone(),
        })
    }
}

/// On-disk matrix encodings understood by [`load_matrix`] / [`save_matrix`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// Comma-separated values, no header row.
    Csv,
    /// `RPMAT64\0`, u64 rows, u64 cols, then row-major f64, little-endian.
    Raw64,
}

impl MatrixFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "csv" => Ok(MatrixFormat::Csv),
            "raw64" => Ok(MatrixFormat::Raw64),
            other => Err(Error::invalid(format!("unknown matrix format '{other}'"))),
        }
    }

    /// Guess from the file extension, defaulting to CSV.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("raw64") | Some("rp64") | Some("bin") => MatrixFormat::Raw64,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DataMatrix> {
    match format {
        MatrixFormat::Csv => load_csv(path),
        MatrixFormat::Raw64 => load_raw64(path),
    }
}

pub fn save_matrix(path: &Path, matrix: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_matrix_to(&mut w, matrix, format)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn write_matrix_to(
    w: &mut impl Write,
    matrix: &DenseMatrix,
    format: MatrixFormat,
) -> Result<()> {
    match format {
        MatrixFormat::Csv => {
            for i in 0..matrix.rows() {
                let line = matrix
                    .row(i)
                    .iter()
                    .map(|v| crate::util::fmt_g17(*v))
                    .collect::<Vec<_>>()
                    .join(",");
                writeln!(w, "{line}")?;
            }
        }
        MatrixFormat::Raw64 => {
            w.write_all(RAW64_MAGIC)?;
            w.write_all(&(matrix.rows() as u64).to_le_bytes())?;
            w.write_all(&(matrix.cols() as u64).to_le_bytes())?;
            for v in matrix.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn load_csv(path: &Path) -> Result<DataMatrix> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (j, cell) in trimmed.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|e| Error::Parse {
                row: i + 1,
                col: j + 1,
                msg: format!("{e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i + 1,
                    col: j + 1,
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    row: i + 1,
                    col: row.len(),
                    msg: format!("expected {} cells, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{} is empty", path.display())));
    }
    Ok(DataMatrix::from_dense(DenseMatrix::from_rows(&rows)?))
}

fn load_raw64(path: &Path) -> Result<DataMatrix> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Truncated("missing raw64 header".into()))?;
    if &magic != RAW64_MAGIC {
        return Err(Error::Format(format!(
            "{} is not a raw64 matrix file",
            path.display()
        )));
    }
    let rows = read_u64(&mut r)? as usize;
    let cols = read_u64(&mut r)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(
            "raw64 header declares an empty matrix".into(),
        ));
    }
    let mut values = vec![0.0f64; rows * cols];
    let mut buf = [0u8; 8];
    for (idx, slot) in values.iter_mut().enumerate() {
        r.read_exact(&mut buf).map_err(|_| {
            Error::Truncated(format!("payload ends at entry {idx} of {}", rows * cols))
        })?;
        let v = f64::from_le_bytes(buf);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: idx / cols + 1,
                col: idx % cols + 1,
            });
        }
        *slot = v;
    }
    Ok(DataMatrix::from_dense(DenseMatrix::new(
        rows, cols, values,
    )?))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Truncated("unexpected end of header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Truncated("unexpected end of payload".into()))?;
    Ok(f64::from_le_bytes(buf))
}

/// Centers every row to zero mean and scales it to unit variance
/// (`1/T` convention). Constant rows cannot be normalized and are reported
/// via [`Error::ConstantSignal`] with their index so the caller can drop or
/// re-map the node.
pub fn normalize(x: &DataMatrix) -> Result<DataMatrix> {
    if x.samples() < 2 {
        return Err(Error::invalid("normalize needs at least 2 samples"));
    }
    let n = x.signals();
    let t = x.samples();
    let mut out = x.matrix().clone();
    for i in 0..n {
        let row = out.row_mut(i);
        let mean = row.iter().sum::<f64>() / t as f64;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in row.iter() {
            min = min.min(*v);
            max = max.max(*v);
        }
        if min == max {
            return Err(Error::ConstantSignal { row: i });
        }
        let mut var = 0.0;
        for v in row.iter_mut() {
            *v -= mean;
            var += *v * *v;
        }
        var /= t as f64;
        if var <= 0.0 {
            return Err(Error::ConstantSignal { row: i });
        }
        let inv_sd = 1.0 / var.sqrt();
        for v in row.iter_mut() {
            *v *= inv_sd;
        }
    }
    Ok(DataMatrix {
        matrix: out,
        state: DataState::Normalized,
        effective_samples: t,
        row_labels: x.row_labels.clone(),
    })
}

/// Outcome of [`mad_clamp`].
#[derive(Clone, Debug)]
pub struct MadClamp {
    pub values: Vec<f64>,
    /// Number of entries that were clipped to the band.
    pub clamped: usize,
    /// True when the MAD was zero and the input passed through unchanged.
    pub degenerate: bool,
}

/// Clips entries to `median +- k * MAD` where `MAD = median(|x - median|)`.
/// A zero MAD would clamp everything to the median, so that case passes the
/// input through and flags it instead.
pub fn mad_clamp(x: &[f64], k: f64) -> Result<MadClamp> {
    if x.is_empty() {
        return Err(Error::invalid("mad_clamp of an empty vector"));
    }
    if !k.is_finite() || k <= 0.0 {
        return Err(Error::invalid("mad_clamp threshold must be positive"));
    }
    let med = median(x);
    let deviations: Vec<f64> = x.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&deviations);
    if mad <= 0.0 {
        return Ok(MadClamp {
            values: x.to_vec(),
            clamped: 0,
            degenerate: true,
        });
    }
    let lo = med - k * mad;
    let hi = med + k * mad;
    let mut clamped = 0;
    let values = x
        .iter()
        .map(|&v| {
            if v < lo {
                clamped += 1;
                lo
            } else if v > hi {
                clamped += 1;
                hi
            } else {
                v
            }
        })
        .collect();
    Ok(MadClamp {
        values,
        clamped,
        degenerate: false,
    })
}

fn median(x: &[f64]) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Assignment of every input node to a parcel label in `1..=parcel_count`.
#[derive(Clone, Debug)]
pub struct ParcellationMap {
    labels: Vec<usize>,
    parcel_count: usize,
}

impl ParcellationMap {
    pub fn new(labels: Vec<usize>, parcel_count: usize) -> Result<Self> {
        if parcel_count == 0 {
            return Err(Error::invalid("parcel count must be positive"));
        }
        if labels.iter().any(|&l| l == 0 || l > parcel_count) {
            return Err(Error::invalid(format!(
                "labels must lie in 1..={parcel_count}"
            )));
        }
        let mut seen = vec![false; parcel_count];
        for &l in &labels {
            seen[l - 1] = true;
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("parcel {} is empty", p + 1)));
        }
        Ok(Self {
            labels,
            parcel_count,
        })
    }

    /// One label per line, one-based, `#` comments allowed.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let reader = BufReader::new(file);
        let mut labels = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let l: usize = body.parse().map_err(|e| Error::Parse {
                row: i + 1,
                col: 1,
                msg: format!("{e}"),
            })?;
            labels.push(l);
        }
        if labels.is_empty() {
            return Err(Error::invalid("parcellation file has no labels"));
        }
        let parcel_count = *labels.iter().max().unwrap();
        Self::new(labels, parcel_count)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn parcel_count(&self) -> usize {
        self.parcel_count
    }
}

/// Averages the rows of each parcel (unweighted) and re-normalizes the
/// result to zero mean and unit variance.
pub fn parcel_average(x: &DataMatrix, map: &ParcellationMap) -> Result<DataMatrix> {
    if map.node_count() != x.signals() {
        return Err(Error::invalid(format!(
            "parcellation covers {} nodes but data has {} rows",
            map.node_count(),
            x.signals()
        )));
    }
    let t = x.samples();
    let p = map.parcel_count();
    let mut sums = DenseMatrix::zeros(p, t);
    let mut counts = vec![0usize; p];
    for i in 0..x.signals() {
        let label = map.labels[i] - 1;
        counts[label] += 1;
        let src = x.matrix().row(i);
        let dst = sums.row_mut(label);
        for j in 0..t {
            dst[j] += src[j];
        }
    }
    for (label, &count) in counts.iter().enumerate() {
        let inv = 1.0 / count as f64;
        for v in sums.row_mut(label) {
            *v *= inv;
        }
    }
    let averaged = DataMatrix {
        matrix: sums,
        state: DataState::Raw,
        effective_samples: t,
        row_labels: Some((1..=p).map(|l| l.to_string()).collect()),
    };
    normalize(&averaged)
}
