//! Test-retest and generalization harness: split-sample negative
//! log-likelihood, intraclass correlation (two-way mixed, consistency,
//! single measures), and grid sweeps over (dimension, rho, alpha, method).
//!
//! Everything here is deterministic for a fixed seed: splits are drawn from
//! dedicated generator streams, grid cells are evaluated in a fixed order,
//! and reports serialize with 17-significant-digit floats, so reruns are
//! byte-identical.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::NetworkSelection;
use crate::error::{Error, Result};
use crate::ingest::{load_matrix, normalize, DataMatrix, MatrixFormat};
use crate::matcore::DenseMatrix;
use crate::randproj::{random_project, ProjectionConfig};
use crate::riccati::{estimate, estimate_tikhonov, FactoredPrecision, PenaltyShape};
use crate::rng::SplitMix64;
use crate::util::fmt_g17;

/// Split-sample negative log-likelihood
/// `NLL(Q; C) = trace(C Q) - log det Q`; lower means the precision
/// generalizes better to the held-out covariance.
pub fn nll(q: &FactoredPrecision, c_heldout: &DenseMatrix) -> Result<f64> {
    Ok(q.trace_product(c_heldout)? - q.logdet()?)
}

/// ICC(C,1): two-way mixed-effects, consistency, single measures, over an
/// n-subjects x k-repetitions table:
/// `(MS_R - MS_E) / (MS_R + (k-1) MS_E)` from the two-way ANOVA
/// decomposition. Invariant to adding a per-repetition constant.
pub fn icc_c1(ratings: &DenseMatrix) -> Result<f64> {
    let n = ratings.rows();
    let k = ratings.cols();
    if n < 2 || k < 2 {
        return Err(Error::invalid(format!(
            "icc needs at least 2 subjects and 2 repetitions, got {n}x{k}"
        )));
    }
    let nf = n as f64;
    let kf = k as f64;
    let grand = ratings.values().iter().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = (0..n)
        .map(|i| ratings.row(i).iter().sum::<f64>() / kf)
        .collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| ratings[(i, j)]).sum::<f64>() / nf)
        .collect();

    let ss_rows: f64 = row_means
        .iter()
        .map(|r| (r - grand) * (r - grand))
        .sum::<f64>()
        * kf;
    let mut ss_err = 0.0;
    for i in 0..n {
        for j in 0..k {
            let resid = ratings[(i, j)] - row_means[i] - col_means[j] + grand;
            ss_err += resid * resid;
        }
    }
    let ms_rows = ss_rows / (nf - 1.0);
    let ms_err = ss_err / ((nf - 1.0) * (kf - 1.0));
    let denom = ms_rows + (kf - 1.0) * ms_err;
    if denom <= 0.0 {
        return Err(Error::DegenerateInput(
            "ratings carry no subject or residual variance".into(),
        ));
    }
    Ok((ms_rows - ms_err) / denom)
}

/// Summary of [`edge_icc`].
#[derive(Clone, Debug)]
pub struct EdgeIccSummary {
    /// Mean ICC over non-degenerate upper-triangle edges.
    pub mean_icc: f64,
    pub edges_used: usize,
    /// Edges excluded because their ratings carried no variance.
    pub edges_degenerate: usize,
}

/// ICC per upper-triangle edge of per-scan partial-correlation matrices
/// (`partials[k][r]` is subject k, repetition r), averaged over edges.
/// Degenerate edges are excluded and counted.
pub fn edge_icc(partials: &[Vec<DenseMatrix>]) -> Result<EdgeIccSummary> {
    let subjects = partials.len();
    if subjects < 2 {
        return Err(Error::invalid("edge_icc needs at least 2 subjects"));
    }
    let reps = partials[0].len();
    if reps < 2 {
        return Err(Error::invalid("edge_icc needs at least 2 repetitions"));
    }
    if partials.iter().any(|s| s.len() != reps) {
        return Err(Error::invalid("subjects disagree on repetition count"));
    }
    let nodes = partials[0][0].rows();
    for subject in partials {
        for p in subject {
            if p.rows() != nodes || p.cols() != nodes {
                return Err(Error::invalid("partial matrices disagree on size"));
            }
        }
    }

    let mut total = 0.0;
    let mut used = 0usize;
    let mut degenerate = 0usize;
    let mut ratings = DenseMatrix::zeros(subjects, reps);
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            for (k, subject) in partials.iter().enumerate() {
                for (r, p) in subject.iter().enumerate() {
                    ratings[(k, r)] = p[(i, j)];
                }
            }
            match icc_c1(&ratings) {
                Ok(v) => {
                    total += v;
                    used += 1;
                }
                Err(Error::DegenerateInput(_)) => degenerate += 1,
                Err(e) => return Err(e),
            }
        }
    }
    if used == 0 {
        return Err(Error::DegenerateInput("every edge is degenerate".into()));
    }
    Ok(EdgeIccSummary {
        mean_icc: total / used as f64,
        edges_used: used,
        edges_degenerate: degenerate,
    })
}

/// Deterministic split schedule for the sweep.
#[derive(Clone, Copy, Debug)]
pub struct SplitPlan {
    pub n_repetitions: usize,
    pub group_size: usize,
    pub seed: u64,
}

impl SplitPlan {
    fn validate(&self, cohort_size: usize) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::invalid("group size must be at least 2"));
        }
        if self.n_repetitions == 0 {
            return Err(Error::invalid("need at least one repetition"));
        }
        if cohort_size < 2 * self.group_size {
            return Err(Error::invalid(format!(
                "cohort of {cohort_size} cannot form two groups of {}",
                self.group_size
            )));
        }
        Ok(())
    }
}

/// One subject: an identifier and one or more scans (repetitions).
#[derive(Clone, Debug)]
pub struct Subject {
    pub id: String,
    pub scans: Vec<DataMatrix>,
}

/// A cohort of subjects with repetition grouping.
#[derive(Clone, Debug, Default)]
pub struct Cohort {
    subjects: Vec<Subject>,
}

impl Cohort {
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::invalid("cohort is empty"));
        }
        let n = subjects[0].scans.first().map(|s| s.signals()).unwrap_or(0);
        if n == 0 {
            return Err(Error::invalid("first subject has no scans"));
        }
        for s in &subjects {
            if s.scans.is_empty() {
                return Err(Error::invalid(format!("subject {} has no scans", s.id)));
            }
            if s.scans.iter().any(|x| x.signals() != n) {
                return Err(Error::invalid(format!(
                    "subject {} disagrees on node count",
                    s.id
                )));
            }
        }
        Ok(Self { subjects })
    }

    /// Manifest format: one `subject_id,path` pair per line, `#` comments;
    /// scans grouped by subject in order of first appearance, repetition
    /// order as listed. Paths resolve relative to the manifest location.
    pub fn load_manifest(path: &Path) -> Result<Self> {
        let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
        let file = File::open(path)?;
        let reader = BufReader::new(file);
        let mut order: Vec<String> = Vec::new();
        let mut scans: BTreeMap<String, Vec<DataMatrix>> = BTreeMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (id, rel) = body.split_once(',').ok_or_else(|| Error::Parse {
                row: lineno + 1,
                col: 1,
                msg: "expected 'subject_id,path'".into(),
            })?;
            let id = id.trim().to_string();
            let rel = rel.trim();
            if id.is_empty() || rel.is_empty() {
                return Err(Error::Parse {
                    row: lineno + 1,
                    col: 1,
                    msg: "empty subject id or path".into(),
                });
            }
            let scan_path = if Path::new(rel).is_absolute() {
                Path::new(rel).to_path_buf()
            } else {
                base.join(rel)
            };
            let matrix = load_matrix(&scan_path, MatrixFormat::infer(&scan_path))?;
            if !scans.contains_key(&id) {
                order.push(id.clone());
            }
            scans.entry(id).or_default().push(matrix);
        }
        let subjects = order
            .into_iter()
            .map(|id| {
                let s = scans.remove(&id).unwrap();
                Subject { id, scans: s }
            })
            .collect();
        Self::new(subjects)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    #[inline]
    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn node_count(&self) -> usize {
        self.subjects[0].scans[0].signals()
    }

    /// Concatenates all scans of the listed subjects along the sample axis
    /// and normalizes the result.
    pub fn concatenate_normalized(&self, members: &[usize]) -> Result<DataMatrix> {
        let mut blocks: Vec<&DenseMatrix> = Vec::new();
        for &idx in members {
            let subject = self
                .subjects
                .get(idx)
                .ok_or_else(|| Error::invalid(format!("subject index {idx} out of range")))?;
            for scan in &subject.scans {
                blocks.push(scan.matrix());
            }
        }
        let concatenated = DenseMatrix::hcat(&blocks)?;
        normalize(&DataMatrix::from_dense(concatenated))
    }
}

/// Position on the dimension axis of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DimensionSpec {
    /// Randomized projection to the given sample dimension.
    Projected(usize),
    /// No compression.
    Full,
}

impl DimensionSpec {
    pub fn parse(token: &str) -> Result<Self> {
        if token.eq_ignore_ascii_case("full") {
            Ok(DimensionSpec::Full)
        } else {
            let t: usize = token
                .parse()
                .map_err(|_| Error::invalid(format!("bad dimension '{token}'")))?;
            if t == 0 {
                return Err(Error::invalid("dimension must be positive"));
            }
            Ok(DimensionSpec::Projected(t))
        }
    }
}

impl fmt::Display for DimensionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimensionSpec::Projected(t) => write!(f, "{t}"),
            DimensionSpec::Full => write!(f, "full"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EstimationMethod {
    Riccati,
    Tikhonov,
}

impl EstimationMethod {
    pub fn parse(token: &str) -> Result<Self> {
        match token.to_ascii_lowercase().as_str() {
            "riccati" => Ok(EstimationMethod::Riccati),
            "tikhonov" => Ok(EstimationMethod::Tikhonov),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimationMethod::Riccati => write!(f, "riccati"),
            EstimationMethod::Tikhonov => write!(f, "tikhonov"),
        }
    }
}

/// Axes of a sweep. Alphas other than 1 suppress nodes outside `network`
/// (which must then be present).
#[derive(Clone, Debug)]
pub struct SweepGrid {
    pub dimensions: Vec<DimensionSpec>,
    pub rhos: Vec<f64>,
    pub alphas: Vec<f64>,
    pub methods: Vec<EstimationMethod>,
    pub network: Option<NetworkSelection>,
    /// Power iterations used by the dimension-axis projections.
    pub power_iterations: usize,
}

impl SweepGrid {
    fn validate(&self, n: usize) -> Result<()> {
        if self.dimensions.is_empty()
            || self.rhos.is_empty()
            || self.alphas.is_empty()
            || self.methods.is_empty()
        {
            return Err(Error::invalid("every grid axis needs at least one value"));
        }
        if self.rhos.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::invalid("grid rho values must be positive"));
        }
        if self.alphas.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::invalid("grid alpha values must be positive"));
        }
        let has_suppression = self.alphas.iter().any(|a| *a != 1.0);
        if has_suppression {
            match &self.network {
                None => {
                    return Err(Error::invalid(
                        "alpha values other than 1 need a network file",
                    ))
                }
                Some(net) => net.validate_for(n)?,
            }
            if self.methods.contains(&EstimationMethod::Tikhonov) {
                return Err(Error::invalid(
                    "the tikhonov method does not take an alpha axis",
                ));
            }
        }
        Ok(())
    }
}

/// Key of one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellKey {
    pub dimension: DimensionSpec,
    pub rho: f64,
    pub alpha: f64,
    pub method: EstimationMethod,
}

impl Eq for CellKey {}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dimension
            .cmp(&other.dimension)
            .then_with(|| self.rho.total_cmp(&other.rho))
            .then_with(|| self.alpha.total_cmp(&other.alpha))
            .then_with(|| self.method.cmp(&other.method))
    }
}

/// Outcome of one repetition in one cell.
#[derive(Clone, Debug, PartialEq)]
pub enum RepetitionOutcome {
    Value(f64),
    Failed(String),
}

/// All repetitions of one cell.
#[derive(Clone, Debug, Default)]
pub struct CellResult {
    pub outcomes: Vec<RepetitionOutcome>,
}

impl CellResult {
    pub fn successes(&self) -> impl Iterator<Item = f64> + '_ {
        self.outcomes.iter().filter_map(|o| match o {
            RepetitionOutcome::Value(v) => Some(*v),
            RepetitionOutcome::Failed(_) => None,
        })
    }

    pub fn n_failed(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, RepetitionOutcome::Failed(_)))
            .count()
    }

    pub fn mean(&self) -> Option<f64> {
        let values: Vec<f64> = self.successes().collect();
        if values.is_empty() {
            return None;
        }
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn std(&self) -> Option<f64> {
        let values: Vec<f64> = self.successes().collect();
        if values.is_empty() {
            return None;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        Some(var.sqrt())
    }
}

/// Per-cell statistics of one metric over the repetition schedule.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub metric: String,
    pub n_repetitions: usize,
    pub cells: BTreeMap<CellKey, CellResult>,
}

impl ValidationReport {
    /// Flat CSV, one row per successful repetition per cell:
    /// `dimension,rho,alpha,method,metric,value,repetition`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "dimension,rho,alpha,method,metric,value,repetition")?;
        for (key, cell) in &self.cells {
            for (rep, outcome) in cell.outcomes.iter().enumerate() {
                if let RepetitionOutcome::Value(v) = outcome {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{rep}",
                        key.dimension,
                        fmt_g17(key.rho),
                        fmt_g17(key.alpha),
                        key.method,
                        self.metric,
                        fmt_g17(*v),
                    )?;
                }
            }
        }
        Ok(())
    }

    /// JSON summary: per-cell mean/std plus failure counts. Failed
    /// repetitions are flagged here rather than dropped silently.
    pub fn write_json(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{{")?;
        writeln!(w, "  \"metric\": \"{}\",", self.metric)?;
        writeln!(w, "  \"repetitions\": {},", self.n_repetitions)?;
        writeln!(w, "  \"cells\": [")?;
        let total = self.cells.len();
        for (idx, (key, cell)) in self.cells.iter().enumerate() {
            let n_ok = cell.outcomes.len() - cell.n_failed();
            let mean = cell.mean().map(fmt_g17).unwrap_or_else(|| "null".into());
            let std = cell.std().map(fmt_g17).unwrap_or_else(|| "null".into());
            write!(
                w,
                "    {{\"dimension\": \"{}\", \"rho\": {}, \"alpha\": {}, \"method\": \"{}\", \"n\": {}, \"n_failed\": {}, \"mean\": {}, \"std\": {}}}",
                key.dimension,
                fmt_g17(key.rho),
                fmt_g17(key.alpha),
                key.method,
                n_ok,
                cell.n_failed(),
                mean,
                std,
            )?;
            writeln!(w, "{}", if idx + 1 < total { "," } else { "" })?;
        }
        writeln!(w, "  ]")?;
        writeln!(w, "}}")?;
        Ok(())
    }

    pub fn save(&self, csv_path: Option<&Path>, json_path: Option<&Path>) -> Result<()> {
        if let Some(p) = csv_path {
            let mut w = BufWriter::new(File::create(p)?);
            self.write_csv(&mut w)?;
            w.flush()?;
        }
        if let Some(p) = json_path {
            let mut w = BufWriter::new(File::create(p)?);
            self.write_json(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }
}

/// Runs the split-sample NLL sweep: per repetition, shuffle the cohort,
/// estimate on group 1, score against group 2's covariance, once per grid
/// cell. Repetitions run in parallel; the result does not depend on the
/// thread count.
pub fn split_sample_sweep(
    cohort: &Cohort,
    plan: &SplitPlan,
    grid: &SweepGrid,
) -> Result<ValidationReport> {
    plan.validate(cohort.len())?;
    let n = cohort.node_count();
    grid.validate(n)?;

    let per_repetition: Vec<Result<Vec<(CellKey, RepetitionOutcome)>>> = (0..plan.n_repetitions)
        .into_par_iter()
        .map(|rep| evaluate_repetition(cohort, plan, grid, rep))
        .collect();

    let mut cells: BTreeMap<CellKey, CellResult> = BTreeMap::new();
    for outcome in per_repetition {
        for (key, value) in outcome? {
            cells.entry(key).or_default().outcomes.push(value);
        }
    }
    Ok(ValidationReport {
        metric: "nll".into(),
        n_repetitions: plan.n_repetitions,
        cells,
    })
}

fn evaluate_repetition(
    cohort: &Cohort,
    plan: &SplitPlan,
    grid: &SweepGrid,
    rep: usize,
) -> Result<Vec<(CellKey, RepetitionOutcome)>> {
    let mut rng = SplitMix64::stream(plan.seed, rep as u64);
    let mut order: Vec<usize> = (0..cohort.len()).collect();
    rng.shuffle(&mut order);
    let group1 = &order[..plan.group_size];
    let group2 = &order[plan.group_size..2 * plan.group_size];

    let train = cohort.concatenate_normalized(group1)?;
    let heldout = cohort.concatenate_normalized(group2)?;
    let c2 = heldout.covariance()?;

    let n = cohort.node_count();
    let mut results = Vec::new();
    for (dim_idx, &dimension) in grid.dimensions.iter().enumerate() {
        // one projection per (repetition, dimension), shared by all cells
        let projected: Result<DataMatrix> = match dimension {
            DimensionSpec::Full => Ok(train.clone()),
            DimensionSpec::Projected(t) => {
                let cfg = ProjectionConfig {
                    target_dim: t,
                    power_iterations: grid.power_iterations,
                    seed: SplitMix64::stream(plan.seed, rep as u64)
                        .next_u64()
                        .wrapping_add(dim_idx as u64),
                };
                random_project(&train, &cfg).map(|p| p.data)
            }
        };
        for &rho in &grid.rhos {
            for &alpha in &grid.alphas {
                for &method in &grid.methods {
                    let key = CellKey {
                        dimension,
                        rho,
                        alpha,
                        method,
                    };
                    let outcome = match &projected {
                        Err(e) => RepetitionOutcome::Failed(e.to_string()),
                        Ok(y) => {
                            match evaluate_cell(y, &c2, n, rho, alpha, method, &grid.network) {
                                Ok(v) => RepetitionOutcome::Value(v),
                                Err(e) => RepetitionOutcome::Failed(e.to_string()),
                            }
                        }
                    };
                    results.push((key, outcome));
                }
            }
        }
    }
    Ok(results)
}

fn evaluate_cell(
    train: &DataMatrix,
    c_heldout: &DenseMatrix,
    n: usize,
    rho: f64,
    alpha: f64,
    method: EstimationMethod,
    network: &Option<NetworkSelection>,
) -> Result<f64> {
    let q = match method {
        EstimationMethod::Tikhonov => estimate_tikhonov(train, rho)?,
        EstimationMethod::Riccati => {
            let penalty = if alpha == 1.0 {
                PenaltyShape::identity(rho)?
            } else {
                let net = network
                    .as_ref()
                    .ok_or_else(|| Error::invalid("alpha suppression needs a network"))?;
                PenaltyShape::roi(n, net.indices(), alpha, rho)?
            };
            estimate(train, &penalty)?
        }
    };
    nll(&q, c_heldout)
}
