//! Subcommand implementations.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{ConfigFile, Merge};
use super::{
    atomic_write, CliError, DensifyArgs, DistanceArgs, EstimateArgs, IccArgs, JsvdArgs,
    PartialsArgs, ProjectArgs, TseeArgs, ValidateArgs,
};
use crate::analysis::{self, NetworkSelection};
use crate::error::Error;
use crate::ingest::{load_matrix, normalize, write_matrix_to, DataMatrix, DataState, MatrixFormat};
use crate::matcore::DenseMatrix;
use crate::randproj::{random_project, retained_energy, ProjectionConfig};
use crate::riccati::{
    estimate as estimate_riccati, estimate_tikhonov, FactoredPrecision, PenaltyShape,
    DEFAULT_DENSIFY_CAP,
};
use crate::rng::SplitMix64;
use crate::shared::{fit_shared, subject_precision, JsvdOptions};
use crate::util::fmt_g17;
use crate::validation::{
    edge_icc, icc_c1, split_sample_sweep, Cohort, DimensionSpec, EstimationMethod, SplitPlan,
    SweepGrid,
};

type CliResult = Result<(), CliError>;

fn load_input(path: &Path) -> Result<DataMatrix, CliError> {
    Ok(load_matrix(path, MatrixFormat::infer(path))?)
}

fn output_format(
    merge: &Merge,
    flag: Option<String>,
    default: MatrixFormat,
) -> Result<MatrixFormat, CliError> {
    match merge.string(flag, "format") {
        None => Ok(default),
        Some(name) => Ok(MatrixFormat::from_name(&name)?),
    }
}

fn prepare(
    x: DataMatrix,
    trim: usize,
    skip_normalize: bool,
    samples_override: Option<usize>,
) -> Result<DataMatrix, CliError> {
    if let Some(samples) = samples_override {
        if trim > 0 || skip_normalize {
            return Err(CliError::Usage(
                "--samples already implies untouched, unnormalized input".into(),
            ));
        }
        return Ok(DataMatrix::with_state(
            x.matrix().clone(),
            DataState::Projected,
            samples,
        ));
    }
    let x = if trim > 0 {
        x.trim_initial_samples(trim)?
    } else {
        x
    };
    if skip_normalize {
        Ok(x)
    } else {
        Ok(normalize(&x)?)
    }
}

pub(super) fn project(args: ProjectArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "project",
        config,
    };
    let mut inputs: Vec<PathBuf> = args.inputs;
    if inputs.is_empty() {
        inputs = merge
            .list(Vec::new(), "input")
            .into_iter()
            .map(PathBuf::from)
            .collect();
    }
    if inputs.is_empty() {
        return Err(CliError::Usage("no input matrices given".into()));
    }
    let t = merge.required::<usize>(args.t, "t")?;
    let q = merge.parse(args.q, "q")?.unwrap_or(0);
    let seed = merge.parse(args.seed, "seed")?.unwrap_or(0);
    let trim = merge.parse(args.trim, "trim")?.unwrap_or(0);
    let skip_normalize = merge.flag(args.skip_normalize, "skip-normalize")?;
    let shared_basis = merge.flag(args.shared_basis, "shared-basis")?;
    let format = output_format(&merge, args.format, MatrixFormat::Raw64)?;
    let output = merge
        .string(args.output.map(|p| p.display().to_string()), "output")
        .map(PathBuf::from);
    let output_dir = merge
        .string(
            args.output_dir.map(|p| p.display().to_string()),
            "output-dir",
        )
        .map(PathBuf::from);
    let stats = merge
        .string(args.stats.map(|p| p.display().to_string()), "stats")
        .map(PathBuf::from);

    let prepared: Vec<DataMatrix> = inputs
        .iter()
        .map(|p| prepare(load_input(p)?, trim, skip_normalize, None))
        .collect::<Result<_, CliError>>()?;

    if shared_basis {
        // one basis for the column-wise concatenation of all inputs
        let blocks: Vec<&DenseMatrix> = prepared.iter().map(|x| x.matrix()).collect();
        let concatenated = DataMatrix::from_dense(DenseMatrix::hcat(&blocks)?);
        let concatenated = DataMatrix::with_state(
            concatenated.matrix().clone(),
            if skip_normalize {
                DataState::Raw
            } else {
                DataState::Normalized
            },
            concatenated.samples(),
        );
        let out_path =
            output.ok_or_else(|| CliError::Usage("--shared-basis needs --output".into()))?;
        let projection = random_project(
            &concatenated,
            &ProjectionConfig {
                target_dim: t,
                power_iterations: q,
                seed,
            },
        )?;
        let energy = retained_energy(&concatenated, &projection.data)?;
        write_projection(
            &out_path,
            stats.as_deref(),
            projection.data.matrix(),
            energy,
            format,
        )?;
        return Ok(());
    }

    if inputs.len() == 1 {
        let out_path =
            output.ok_or_else(|| CliError::Usage("single input needs --output".into()))?;
        let projection = random_project(
            &prepared[0],
            &ProjectionConfig {
                target_dim: t,
                power_iterations: q,
                seed,
            },
        )?;
        let energy = retained_energy(&prepared[0], &projection.data)?;
        write_projection(
            &out_path,
            stats.as_deref(),
            projection.data.matrix(),
            energy,
            format,
        )?;
        return Ok(());
    }

    let dir =
        output_dir.ok_or_else(|| CliError::Usage("multiple inputs need --output-dir".into()))?;
    if stats.is_some() {
        return Err(CliError::Usage(
            "--stats applies to a single output; per-input sidecars are derived automatically"
                .into(),
        ));
    }
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let ext = match format {
        MatrixFormat::Csv => "csv",
        MatrixFormat::Raw64 => "raw64",
    };
    for (idx, (path, x)) in inputs.iter().zip(&prepared).enumerate() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| format!("input{idx}"));
        let out_path = dir.join(format!("{stem}.proj.{ext}"));
        let projection = random_project(
            x,
            &ProjectionConfig {
                target_dim: t,
                power_iterations: q,
                // independent stream per input
                seed: SplitMix64::stream(seed, idx as u64).next_u64(),
            },
        )?;
        let energy = retained_energy(x, &projection.data)?;
        write_projection(&out_path, None, projection.data.matrix(), energy, format)?;
    }
    Ok(())
}

fn write_projection(
    out_path: &Path,
    stats: Option<&Path>,
    matrix: &DenseMatrix,
    energy: f64,
    format: MatrixFormat,
) -> CliResult {
    atomic_write(out_path, |mut w| write_matrix_to(&mut w, matrix, format))?;
    let stats_path = match stats {
        Some(p) => p.to_path_buf(),
        None => {
            let mut name = out_path.as_os_str().to_os_string();
            name.push(".stats");
            PathBuf::from(name)
        }
    };
    atomic_write(&stats_path, |w| {
        writeln!(w, "retained_energy={}", fmt_g17(energy))?;
        Ok(())
    })?;
    Ok(())
}

/// Penalty spec grammar: `identity`, `diagonal:FILE`, `roi:FILE:ALPHA`,
/// `tikhonov`.
enum PenaltySpec {
    Identity,
    Diagonal(PathBuf),
    Roi(PathBuf, f64),
    Tikhonov,
}

impl PenaltySpec {
    fn parse(text: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = text.split(':').collect();
        match parts.as_slice() {
            ["identity"] => Ok(PenaltySpec::Identity),
            ["tikhonov"] => Ok(PenaltySpec::Tikhonov),
            ["diagonal", path] => Ok(PenaltySpec::Diagonal(PathBuf::from(path))),
            ["roi", path, alpha] => {
                let alpha: f64 = alpha.parse().map_err(|_| {
                    CliError::Usage(format!("bad roi alpha '{alpha}' in penalty spec"))
                })?;
                Ok(PenaltySpec::Roi(PathBuf::from(path), alpha))
            }
            _ => Err(CliError::Usage(format!(
                "bad penalty spec '{text}' (identity | diagonal:FILE | roi:FILE:ALPHA | tikhonov)"
            ))),
        }
    }
}

fn load_weights(path: &Path) -> Result<Vec<f64>, CliError> {
    let file = File::open(path).map_err(Error::from)?;
    let reader = BufReader::new(file);
    let mut weights = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(Error::from)?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let w: f64 = body.parse().map_err(|e| Error::Parse {
            row: lineno + 1,
            col: 1,
            msg: format!("{e}"),
        })?;
        weights.push(w);
    }
    if weights.is_empty() {
        return Err(CliError::Core(Error::invalid(format!(
            "{} contains no weights",
            path.display()
        ))));
    }
    Ok(weights)
}

pub(super) fn estimate(args: EstimateArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "estimate",
        config,
    };
    let input =
        PathBuf::from(merge.required_string(args.input.map(|p| p.display().to_string()), "input")?);
    let rho = merge.required::<f64>(args.rho, "rho")?;
    let spec = PenaltySpec::parse(&merge.required_string(args.penalty, "penalty")?)?;
    let output = PathBuf::from(
        merge.required_string(args.output.map(|p| p.display().to_string()), "output")?,
    );
    let trim = merge.parse(args.trim, "trim")?.unwrap_or(0);
    let skip_normalize = merge.flag(args.skip_normalize, "skip-normalize")?;
    let samples = merge.parse(args.samples, "samples")?;
    let project_t = merge.parse(args.project_t, "project-t")?;
    let project_q = merge.parse(args.project_q, "project-q")?.unwrap_or(0);
    let seed = merge.parse(args.seed, "seed")?.unwrap_or(0);

    let started = Instant::now();
    let mut x = prepare(load_input(&input)?, trim, skip_normalize, samples)?;
    if let Some(t) = project_t {
        x = random_project(
            &x,
            &ProjectionConfig {
                target_dim: t,
                power_iterations: project_q,
                seed,
            },
        )?
        .data;
    }
    let n = x.signals();
    let precision = match spec {
        PenaltySpec::Identity => estimate_riccati(&x, &PenaltyShape::identity(rho)?)?,
        PenaltySpec::Tikhonov => estimate_tikhonov(&x, rho)?,
        PenaltySpec::Diagonal(path) => {
            let weights = load_weights(&path)?;
            estimate_riccati(&x, &PenaltyShape::diagonal(weights, rho)?)?
        }
        PenaltySpec::Roi(path, alpha) => {
            let net = NetworkSelection::load(&path)?;
            net.validate_for(n)?;
            estimate_riccati(&x, &PenaltyShape::roi(n, net.indices(), alpha, rho)?)?
        }
    };
    atomic_write(&output, |mut w| precision.write_to(&mut w))?;
    println!(
        "N={} m={} rho={}",
        precision.dim(),
        precision.rank(),
        fmt_g17(rho)
    );
    eprintln!("wall_time_s={:.3}", started.elapsed().as_secs_f64());
    Ok(())
}

pub(super) fn tsee(args: TseeArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "tsee",
        config,
    };
    let precision_path = PathBuf::from(
        merge.required_string(args.precision.map(|p| p.display().to_string()), "precision")?,
    );
    let network_path = PathBuf::from(
        merge.required_string(args.network.map(|p| p.display().to_string()), "network")?,
    );
    let alpha = merge.parse(args.alpha, "alpha")?;
    let direct = merge.flag(args.direct, "direct")?;
    let cap = merge.parse(args.cap, "cap")?.unwrap_or(DEFAULT_DENSIFY_CAP);
    let output = merge
        .string(args.output.map(|p| p.display().to_string()), "output")
        .map(PathBuf::from);

    let precision = FactoredPrecision::load(&precision_path)?;
    let net = NetworkSelection::load(&network_path)?;
    net.validate_for(precision.dim())?;

    if let Some(alpha) = alpha {
        check_net_alpha(&precision, &net, alpha)?;
    }

    let value = if direct {
        let dense = precision.densify_with_cap(cap)?;
        analysis::tsee_direct(&dense.principal_submatrix(net.indices()))?
    } else {
        analysis::tsee_fast(&precision, &net)?
    };
    println!("{}", fmt_g17(value));
    if let Some(path) = output {
        atomic_write(&path, |w| {
            writeln!(w, "{}", fmt_g17(value))?;
            Ok(())
        })?;
    }
    Ok(())
}

/// Verifies that the stored baseline over the network matches
/// `c / alpha^2` for the user-supplied alpha.
fn check_net_alpha(
    precision: &FactoredPrecision,
    net: &NetworkSelection,
    alpha: f64,
) -> Result<(), CliError> {
    let expected = precision.baseline_c() / (alpha * alpha);
    let actual = match precision.baseline() {
        crate::riccati::Baseline::Scalar(b) => *b,
        crate::riccati::Baseline::Diagonal(b) => b[net.indices()[0]],
        crate::riccati::Baseline::Dense(_) => {
            return Err(CliError::Core(Error::UnsupportedPenalty(
                "cannot cross-check alpha against a general penalty".into(),
            )))
        }
    };
    if (actual - expected).abs() > 1e-9 * expected.abs().max(1e-300) {
        return Err(CliError::Core(Error::invalid(format!(
            "network penalty mismatch: stored baseline {actual:.6e}, alpha {alpha} implies {expected:.6e}"
        ))));
    }
    Ok(())
}

pub(super) fn partials(args: PartialsArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "partials",
        config,
    };
    let precision_path = PathBuf::from(
        merge.required_string(args.precision.map(|p| p.display().to_string()), "precision")?,
    );
    let output = PathBuf::from(
        merge.required_string(args.output.map(|p| p.display().to_string()), "output")?,
    );
    let format = output_format(&merge, args.format, MatrixFormat::Csv)?;
    let cap = merge.parse(args.cap, "cap")?.unwrap_or(DEFAULT_DENSIFY_CAP);

    let precision = FactoredPrecision::load(&precision_path)?;
    let dense = precision.densify_with_cap(cap)?;
    let partials = analysis::partial_correlations(&dense)?;
    atomic_write(&output, |mut w| write_matrix_to(&mut w, &partials, format))?;
    Ok(())
}

pub(super) fn jsvd(args: JsvdArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "jsvd",
        config,
    };
    let mut inputs: Vec<PathBuf> = args.inputs;
    if inputs.is_empty() {
        inputs = merge
            .list(Vec::new(), "inputs")
            .into_iter()
            .map(PathBuf::from)
            .collect();
    }
    if inputs.is_empty() {
        return Err(CliError::Usage("no input matrices given".into()));
    }
    let m = merge.required::<usize>(args.m, "m")?;
    let rho = merge.required::<f64>(args.rho, "rho")?;
    let output_model = PathBuf::from(merge.required_string(
        args.output_model.map(|p| p.display().to_string()),
        "output-model",
    )?);
    let output_dir = PathBuf::from(merge.required_string(
        args.output_dir.map(|p| p.display().to_string()),
        "output-dir",
    )?);
    let project_t = merge.parse(args.project_t, "project-t")?;
    let project_q = merge.parse(args.project_q, "project-q")?.unwrap_or(0);
    let seed = merge.parse(args.seed, "seed")?.unwrap_or(0);
    let weight_by_scans = merge.flag(args.weight_by_scans, "weight-by-scans")?;
    let trim = merge.parse(args.trim, "trim")?.unwrap_or(0);
    let skip_normalize = merge.flag(args.skip_normalize, "skip-normalize")?;

    let subjects: Vec<DataMatrix> = inputs
        .iter()
        .map(|p| prepare(load_input(p)?, trim, skip_normalize, None))
        .collect::<Result<_, CliError>>()?;

    let penalty = PenaltyShape::identity(rho)?;
    let options = JsvdOptions {
        weight_subjects_equally: !weight_by_scans,
        pre_projection: project_t.map(|t| ProjectionConfig {
            target_dim: t,
            power_iterations: project_q,
            seed,
        }),
    };
    let model = fit_shared(&subjects, m, &penalty, &options)?;
    atomic_write(&output_model, |mut w| model.write_to(&mut w))?;
    std::fs::create_dir_all(&output_dir).map_err(Error::from)?;
    for (idx, path) in inputs.iter().enumerate() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| format!("input{idx}"));
        let precision = subject_precision(&model, idx)?;
        let out = output_dir.join(format!("{idx:03}_{stem}.fprec"));
        atomic_write(&out, |mut w| precision.write_to(&mut w))?;
    }
    println!(
        "N={} m={} K={}",
        model.dim(),
        model.rank(),
        model.subject_count()
    );
    Ok(())
}

pub(super) fn validate(args: ValidateArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "validate",
        config,
    };
    let manifest = PathBuf::from(
        merge.required_string(args.manifest.map(|p| p.display().to_string()), "manifest")?,
    );
    let repetitions = merge.required::<usize>(args.repetitions, "repetitions")?;
    let group_size = merge.required::<usize>(args.group_size, "group-size")?;
    let seed = merge.parse(args.seed, "seed")?.unwrap_or(0);
    let q = merge.parse(args.q, "q")?.unwrap_or(1);
    let jobs = merge.parse(args.jobs, "jobs")?;
    let output_csv = merge
        .string(
            args.output_csv.map(|p| p.display().to_string()),
            "output-csv",
        )
        .map(PathBuf::from);
    let output_json = merge
        .string(
            args.output_json.map(|p| p.display().to_string()),
            "output-json",
        )
        .map(PathBuf::from);
    if output_csv.is_none() && output_json.is_none() {
        return Err(CliError::Usage(
            "need --output-csv and/or --output-json".into(),
        ));
    }

    let dimension_tokens = merge.list(args.dimensions, "dimensions");
    if dimension_tokens.is_empty() {
        return Err(CliError::Usage("missing --dimensions".into()));
    }
    let dimensions = dimension_tokens
        .iter()
        .map(|t| DimensionSpec::parse(t))
        .collect::<Result<Vec<_>, _>>()?;
    let rhos = parse_float_list(&merge.list(args.rhos, "rhos"), "rhos")?;
    let alpha_tokens = merge.list(args.alphas, "alphas");
    let alphas = if alpha_tokens.is_empty() {
        vec![1.0]
    } else {
        parse_float_list(&alpha_tokens, "alphas")?
    };
    let method_tokens = merge.list(args.methods, "methods");
    let methods = if method_tokens.is_empty() {
        vec![EstimationMethod::Riccati]
    } else {
        method_tokens
            .iter()
            .map(|t| EstimationMethod::parse(t))
            .collect::<Result<Vec<_>, _>>()?
    };
    let network = merge
        .string(args.network.map(|p| p.display().to_string()), "network")
        .map(|p| NetworkSelection::load(Path::new(&p)))
        .transpose()?;

    let cohort = Cohort::load_manifest(&manifest)?;
    let plan = SplitPlan {
        n_repetitions: repetitions,
        group_size,
        seed,
    };
    let grid = SweepGrid {
        dimensions,
        rhos,
        alphas,
        methods,
        network,
        power_iterations: q,
    };

    let started = Instant::now();
    let report = match jobs {
        None => split_sample_sweep(&cohort, &plan, &grid)?,
        Some(n_threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n_threads.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
            pool.install(|| split_sample_sweep(&cohort, &plan, &grid))?
        }
    };
    if let Some(path) = &output_csv {
        atomic_write(path, |mut w| report.write_csv(&mut w))?;
    }
    if let Some(path) = &output_json {
        atomic_write(path, |mut w| report.write_json(&mut w))?;
    }
    eprintln!("wall_time_s={:.3}", started.elapsed().as_secs_f64());
    Ok(())
}

fn parse_float_list(tokens: &[String], what: &str) -> Result<Vec<f64>, CliError> {
    if tokens.is_empty() {
        return Err(CliError::Usage(format!("missing --{what}")));
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad value '{t}' in --{what}")))
        })
        .collect()
}

pub(super) fn icc(args: IccArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "icc",
        config,
    };
    let ratings = merge
        .string(args.ratings.map(|p| p.display().to_string()), "ratings")
        .map(PathBuf::from);
    let manifest = merge
        .string(args.manifest.map(|p| p.display().to_string()), "manifest")
        .map(PathBuf::from);
    let output = merge
        .string(args.output.map(|p| p.display().to_string()), "output")
        .map(PathBuf::from);

    let lines: Vec<String> = match (ratings, manifest) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--ratings and --manifest are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Usage("need --ratings or --manifest".into()));
        }
        (Some(path), None) => {
            let table = load_matrix(&path, MatrixFormat::infer(&path))?;
            let value = icc_c1(table.matrix())?;
            vec![format!("icc={}", fmt_g17(value))]
        }
        (None, Some(path)) => {
            let cohort = Cohort::load_manifest(&path)?;
            let partials: Vec<Vec<DenseMatrix>> = cohort
                .subjects()
                .iter()
                .map(|s| s.scans.iter().map(|x| x.matrix().clone()).collect())
                .collect();
            let summary = edge_icc(&partials)?;
            vec![
                format!("mean_edge_icc={}", fmt_g17(summary.mean_icc)),
                format!("edges_used={}", summary.edges_used),
                format!("edges_degenerate={}", summary.edges_degenerate),
            ]
        }
    };
    for line in &lines {
        println!("{line}");
    }
    if let Some(path) = output {
        atomic_write(&path, |w| {
            for line in &lines {
                writeln!(w, "{line}")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub(super) fn distance(args: DistanceArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "distance",
        config,
    };
    let precision_path = PathBuf::from(
        merge.required_string(args.precision.map(|p| p.display().to_string()), "precision")?,
    );
    let maps_a_path = PathBuf::from(
        merge.required_string(args.maps_a.map(|p| p.display().to_string()), "maps-a")?,
    );
    let maps_b_path = PathBuf::from(
        merge.required_string(args.maps_b.map(|p| p.display().to_string()), "maps-b")?,
    );
    let output = PathBuf::from(
        merge.required_string(args.output.map(|p| p.display().to_string()), "output")?,
    );

    let precision = FactoredPrecision::load(&precision_path)?;
    let maps_a = load_input(&maps_a_path)?;
    let maps_b = load_input(&maps_b_path)?;
    if maps_a.signals() != precision.dim() || maps_b.signals() != precision.dim() {
        return Err(CliError::Core(Error::invalid(format!(
            "maps have {} and {} rows but the precision covers {} nodes",
            maps_a.signals(),
            maps_b.signals(),
            precision.dim()
        ))));
    }
    if maps_a.samples() != maps_b.samples() {
        return Err(CliError::Core(Error::invalid(
            "map files disagree on the number of columns",
        )));
    }
    let mut distances = Vec::with_capacity(maps_a.samples());
    for k in 0..maps_a.samples() {
        let a = maps_a.matrix().col(k);
        let b = maps_b.matrix().col(k);
        distances.push(analysis::mahalanobis(&a, &b, &precision)?);
    }
    atomic_write(&output, |w| {
        writeln!(w, "index,distance")?;
        for (k, d) in distances.iter().enumerate() {
            writeln!(w, "{},{}", k + 1, fmt_g17(*d))?;
        }
        Ok(())
    })?;
    Ok(())
}

pub(super) fn densify(args: DensifyArgs, config: &ConfigFile) -> CliResult {
    let merge = Merge {
        section: "densify",
        config,
    };
    let precision_path = PathBuf::from(
        merge.required_string(args.precision.map(|p| p.display().to_string()), "precision")?,
    );
    let output = PathBuf::from(
        merge.required_string(args.output.map(|p| p.display().to_string()), "output")?,
    );
    let format = output_format(&merge, args.format, MatrixFormat::Csv)?;
    let cap = merge.parse(args.cap, "cap")?.unwrap_or(DEFAULT_DENSIFY_CAP);

    let precision = FactoredPrecision::load(&precision_path)?;
    let dense = precision.densify_with_cap(cap)?;
    atomic_write(&output, |mut w| write_matrix_to(&mut w, &dense, format))?;
    Ok(())
}
