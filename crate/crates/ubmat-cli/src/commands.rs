//! Argument definitions and subcommand drivers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ubmat::io::{
    coords_to_json, dataset_from_csv, dense_from_csv, dense_to_csv, labels_from_str, read_coords,
    read_dense_csv, read_plan, DatasetOptions,
};
use ubmat::rng::{Draws, DOMAIN_DATA};
use ubmat::{
    estimate_coordinates, estimate_coordinates_allow_small_n, estimate_precision, m_sample_test,
    morrison_approximation, one_sample_test, run_power_study, run_type1_study, sample_moments,
    Dataset, Error, Method, Partition, Result, Tolerances, UbMatrix,
};

use crate::output::{
    emit, format_coords, format_report, format_study_power, format_study_type1, to_json_line,
};

#[derive(Parser)]
#[command(
    name = "ubmat",
    version,
    about = "Uniform-block matrix algebra, estimation, mean tests and simulation"
)]
pub struct Cli {
    /// Worker threads for the Monte Carlo paths (results do not depend on
    /// this; default lets the runtime choose).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Coordinate-space matrix operations.
    Ops(OpsArgs),
    /// Estimate covariance (or precision) coordinates from observations.
    Estimate(EstimateArgs),
    /// One-sample information test of a hypothesized mean.
    Test1(Test1Args),
    /// M-sample information test for equality of group means.
    Testm(TestmArgs),
    /// Run a Monte Carlo type-1 or power study from a plan file.
    Simulate(SimulateArgs),
    /// Time coordinate-path operations against the dense oracle.
    Bench(BenchArgs),
}

pub enum Outcome {
    Done,
    RejectedNull,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Ops(args) => run_ops(args).map(|()| Outcome::Done),
        Command::Estimate(args) => run_estimate(args).map(|()| Outcome::Done),
        Command::Test1(args) => run_test1(args),
        Command::Testm(args) => run_testm(args),
        Command::Simulate(args) => run_simulate(args).map(|()| Outcome::Done),
        Command::Bench(args) => run_bench(args).map(|()| Outcome::Done),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixOp {
    /// Determinant (or sign/log-determinant with --log).
    Det,
    /// Inverse coordinates.
    Inv,
    /// Eigenvalues with multiplicities.
    Eig,
    /// Integer power (needs --exponent).
    Power,
    /// Orthogonal canonical form.
    Canon,
    /// Correlation coordinates.
    Corr,
    /// Precision coordinates (validates positive definiteness).
    Precision,
    /// Expand coordinates to a dense CSV matrix.
    Expand,
    /// Compress a dense CSV matrix to coordinates.
    Compress,
}

#[derive(Args)]
pub struct OpsArgs {
    #[arg(value_enum)]
    pub op: MatrixOp,
    /// Coordinate JSON input file.
    #[arg(long)]
    pub coords: Option<PathBuf>,
    /// Dense CSV input (always compressed with a structure check first).
    #[arg(long)]
    pub dense: Option<PathBuf>,
    /// Block sizes, e.g. `2,3` (required with --dense).
    #[arg(long)]
    pub partition: Option<String>,
    /// Exponent for the power operation (>= 1).
    #[arg(long)]
    pub exponent: Option<u32>,
    /// Report (sign, log|det|) instead of the determinant.
    #[arg(long)]
    pub log: bool,
    /// Relative uniformity tolerance for the structure check.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Machine-readable JSON instead of human output.
    #[arg(long)]
    pub json: bool,
    /// Write the result here (atomic) instead of stdout. For `canon` this
    /// receives the orthogonal matrix as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_partition(text: &str) -> Result<Partition> {
    let sizes = text
        .split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|_| {
                Error::InvalidParameter(format!("bad partition component {t:?}"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Partition::new(sizes)
}

fn tolerances(uniformity: Option<f64>) -> Tolerances {
    let mut tol = Tolerances::default();
    if let Some(u) = uniformity {
        tol.uniformity = u;
    }
    tol
}

/// Loads the input matrix from exactly one of --coords / --dense.
fn load_matrix(args: &OpsArgs) -> Result<UbMatrix> {
    match (&args.coords, &args.dense) {
        (Some(path), None) => read_coords(path),
        (None, Some(path)) => {
            let partition = parse_partition(args.partition.as_deref().ok_or_else(|| {
                Error::InvalidParameter("--dense input needs --partition".into())
            })?)?;
            let dense = read_dense_csv(path)?;
            UbMatrix::compress_with(&dense, &partition, &tolerances(args.tolerance))
        }
        (Some(_), Some(_)) => Err(Error::InvalidParameter(
            "--coords and --dense are mutually exclusive".into(),
        )),
        (None, None) => Err(Error::InvalidParameter(
            "provide an input with --coords or --dense".into(),
        )),
    }
}

fn run_ops(args: OpsArgs) -> Result<()> {
    let x = load_matrix(&args)?;
    match args.op {
        MatrixOp::Det => {
            let text = if args.log {
                let (sign, log_abs) = x.sign_log_determinant();
                if args.json {
                    to_json_line(&json!({"sign": sign, "log_abs_determinant": log_abs}))
                } else {
                    format!("sign = {sign}\nlog|det| = {log_abs}\n")
                }
            } else {
                let det = x.determinant();
                if args.json {
                    to_json_line(&json!({ "determinant": det }))
                } else {
                    format!("determinant = {det}\n")
                }
            };
            emit(&text, args.out.as_deref())
        }
        MatrixOp::Inv => emit_coords(&x.inverse()?, &args),
        MatrixOp::Precision => emit_coords(&x.precision_coordinates()?, &args),
        MatrixOp::Corr => emit_coords(&x.correlation_coordinates()?, &args),
        MatrixOp::Power => {
            let m = args.exponent.ok_or_else(|| {
                Error::InvalidParameter("power needs --exponent".into())
            })?;
            emit_coords(&x.pow(m)?, &args)
        }
        MatrixOp::Eig => {
            let eigs = x.eigenvalues();
            let text = if args.json {
                let items: Vec<_> = eigs
                    .iter()
                    .map(|&(value, multiplicity)| {
                        json!({"value": value, "multiplicity": multiplicity})
                    })
                    .collect();
                to_json_line(&json!({ "eigenvalues": items }))
            } else {
                let mut t = String::from("value            multiplicity\n");
                for (value, multiplicity) in &eigs {
                    t.push_str(&format!("{value:<16.10} {multiplicity}\n"));
                }
                t
            };
            emit(&text, args.out.as_deref())
        }
        MatrixOp::Canon => {
            let canon = x.canonical_form();
            let summary = if args.json {
                to_json_line(&json!({
                    "diagonal": canon.diagonal,
                    "pairs": canon.pairs,
                    "delta_ties": canon.delta_ties,
                }))
            } else {
                let mut t = String::from("canonical diagonal:\n");
                for v in &canon.diagonal {
                    t.push_str(&format!("  {v}\n"));
                }
                if canon.delta_ties {
                    t.push_str("note: Delta has repeated eigenvalues; the eigenvector basis is solver-chosen\n");
                }
                t
            };
            // The orthogonal matrix goes to --out as CSV; the summary to
            // stdout either way.
            print!("{summary}");
            if let Some(path) = &args.out {
                ubmat::io::write_atomic(path, &dense_to_csv(&canon.gamma))?;
            }
            Ok(())
        }
        MatrixOp::Expand => emit(&dense_to_csv(&x.expand()), args.out.as_deref()),
        MatrixOp::Compress => emit(&coords_to_json(&x), args.out.as_deref()),
    }
}

fn emit_coords(x: &UbMatrix, args: &OpsArgs) -> Result<()> {
    let text = if args.json {
        coords_to_json(x)
    } else {
        format_coords(x)
    };
    emit(&text, args.out.as_deref())
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Observations CSV, one row per observation.
    #[arg(long)]
    pub data: PathBuf,
    /// Block sizes, e.g. `2,3`.
    #[arg(long)]
    pub partition: String,
    /// The CSV has a header row.
    #[arg(long)]
    pub header: bool,
    /// Column name carrying group labels (needs --header).
    #[arg(long)]
    pub label_column: Option<String>,
    /// Single-column file of group labels, one per row.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Skip the n > K + K(K+1)/2 sample-size requirement.
    #[arg(long)]
    pub allow_small_n: bool,
    /// Output plug-in precision coordinates instead of covariance ones.
    #[arg(long)]
    pub precision: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_dataset(
    data: &Path,
    partition: &Partition,
    header: bool,
    label_column: Option<&str>,
    labels: Option<&Path>,
) -> Result<Dataset> {
    let text = std::fs::read_to_string(data)?;
    let extra = match labels {
        Some(path) => Some(labels_from_str(&std::fs::read_to_string(path)?)),
        None => None,
    };
    let options = DatasetOptions {
        has_header: header,
        label_column: label_column.map(str::to_string),
    };
    dataset_from_csv(&text, partition, &options, extra.as_deref())
}

fn run_estimate(args: EstimateArgs) -> Result<()> {
    let partition = parse_partition(&args.partition)?;
    let d = read_dataset(
        &args.data,
        &partition,
        args.header,
        args.label_column.as_deref(),
        args.labels.as_deref(),
    )?;
    let moments = sample_moments(&d)?;
    let est = if args.allow_small_n {
        estimate_coordinates_allow_small_n(&moments, &partition)?
    } else {
        estimate_coordinates(&moments, &partition)?
    };
    let result = if args.precision {
        estimate_precision(&est)?
    } else {
        est
    };
    let text = if args.json {
        coords_to_json(&result)
    } else {
        format_coords(&result)
    };
    emit(&text, args.out.as_deref())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Monte Carlo quantiles and p-values from the exact mixture law.
    Mc,
    /// Morrison's two-moment C1 F(p, C2) approximation.
    Morrison,
}

#[derive(Args)]
pub struct Test1Args {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub partition: String,
    /// Hypothesized mean: inline `0,0,...` or a file of numbers.
    #[arg(long)]
    pub mu0: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Monte Carlo draws of the null law.
    #[arg(long, default_value_t = 200_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Mc)]
    pub method: MethodArg,
    /// The CSV has a header row.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with code 2 when the null is rejected at the given alpha.
    #[arg(long)]
    pub exit_on_reject: bool,
}

/// Parses inline comma-separated numbers, or reads them from a file
/// (comma/whitespace separated).
fn parse_vector(text: &str, expected: usize) -> Result<Vec<f64>> {
    let inline: std::result::Result<Vec<f64>, _> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect();
    let values = match inline {
        Ok(v) => v,
        Err(_) => {
            let path = Path::new(text);
            if !path.exists() {
                return Err(Error::InvalidParameter(format!(
                    "mu0 is neither a number list nor a readable file: {text:?}"
                )));
            }
            std::fs::read_to_string(path)?
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>().map_err(|_| {
                        Error::InvalidParameter(format!("bad number {t:?} in {text}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    if values.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "mu0",
            expected,
            actual: values.len(),
        });
    }
    Ok(values)
}

fn run_test1(args: Test1Args) -> Result<Outcome> {
    let partition = parse_partition(&args.partition)?;
    let d = read_dataset(&args.data, &partition, args.header, None, None)?;
    let mu0 = parse_vector(&args.mu0, partition.total())?;
    let method = match args.method {
        MethodArg::Mc => Method::MonteCarlo,
        MethodArg::Morrison => Method::MorrisonApprox,
    };
    let report = one_sample_test(&d, &mu0, args.alpha, method, args.replicates, args.seed)?;
    let text = if args.json {
        to_json_line(&serde_json::to_value(&report)?)
    } else {
        format_report(&report)
    };
    emit(&text, args.out.as_deref())?;
    Ok(if args.exit_on_reject && report.reject {
        Outcome::RejectedNull
    } else {
        Outcome::Done
    })
}

#[derive(Args)]
pub struct TestmArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub partition: String,
    /// Single-column file of group labels, one per row.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Column name carrying group labels (needs --header).
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// The CSV has a header row.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with code 2 when the null is rejected at the given alpha.
    #[arg(long)]
    pub exit_on_reject: bool,
}

fn run_testm(args: TestmArgs) -> Result<Outcome> {
    let partition = parse_partition(&args.partition)?;
    if args.labels.is_none() && args.label_column.is_none() {
        return Err(Error::InvalidParameter(
            "testm needs group labels: --labels FILE or --label-column NAME".into(),
        ));
    }
    let d = read_dataset(
        &args.data,
        &partition,
        args.header,
        args.label_column.as_deref(),
        args.labels.as_deref(),
    )?;
    let report = m_sample_test(&d, args.alpha, args.replicates, args.seed)?;
    let text = if args.json {
        to_json_line(&serde_json::to_value(&report)?)
    } else {
        format_report(&report)
    };
    emit(&text, args.out.as_deref())?;
    Ok(if args.exit_on_reject && report.reject {
        Outcome::RejectedNull
    } else {
        Outcome::Done
    })
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    /// Rejection rate under the null at the Monte Carlo critical value.
    Type1,
    /// Empirical power against the noncentral-mixture prediction.
    Power,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Plan JSON file.
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, value_enum, default_value_t = StudyKind::Type1)]
    pub study: StudyKind,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-replicate statistics as a one-column CSV.
    #[arg(long)]
    pub per_replicate: Option<PathBuf>,
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let plan = read_plan(&args.plan)?;
    let (text, statistics) = match args.study {
        StudyKind::Type1 => {
            let study = run_type1_study(&plan)?;
            let text = if args.json {
                to_json_line(&serde_json::to_value(&study)?)
            } else {
                format_study_type1(&study)
            };
            (text, study.statistics)
        }
        StudyKind::Power => {
            let study = run_power_study(&plan)?;
            let text = if args.json {
                to_json_line(&serde_json::to_value(&study)?)
            } else {
                format_study_power(&study)
            };
            (text, study.statistics)
        }
    };
    emit(&text, args.out.as_deref())?;
    if let Some(path) = &args.per_replicate {
        let mut csv = String::with_capacity(statistics.len() * 20);
        for s in &statistics {
            csv.push_str(&format!("{s}\n"));
        }
        ubmat::io::write_atomic(path, &csv)?;
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// K = 7 blocks, p = 107 variables.
    Proteomics,
    /// K = 5 blocks, p = 227 variables.
    Imaging,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Named application profile; overrides the grids.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Comma-separated total dimensions.
    #[arg(long, default_value = "64,256")]
    pub p_grid: String,
    /// Comma-separated block counts.
    #[arg(long, default_value = "4,8")]
    pub k_grid: String,
    /// Operations to time: any of det,inv,eig.
    #[arg(long, default_value = "det,inv")]
    pub ops: String,
    /// Iterations per coordinate-path timing (median reported).
    #[arg(long, default_value_t = 64)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

/// Near-even partition with every block of size >= 2.
fn even_partition(k: usize, p: usize) -> Result<Partition> {
    if k == 0 || p < 2 * k {
        return Err(Error::InvalidParameter(format!(
            "cannot split p = {p} into {k} blocks of size >= 2"
        )));
    }
    let base = p / k;
    let rem = p % k;
    let sizes = (0..k).map(|i| base + usize::from(i < rem)).collect();
    Partition::new(sizes)
}

/// Well-conditioned SPD instance for timing runs.
fn bench_instance(partition: &Partition, seed: u64) -> UbMatrix {
    let k = partition.block_count();
    let mut draws = Draws::new(seed, DOMAIN_DATA, 0);
    let a: Vec<f64> = (0..k).map(|_| 0.5 + 2.5 * draws.uniform()).collect();
    let min_a = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_p = *partition.sizes().iter().max().unwrap() as f64;
    let cap = 0.5 * min_a / (k as f64 * max_p);
    let mut b = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = cap * (2.0 * draws.uniform() - 1.0);
            b[i * k + j] = v;
            b[j * k + i] = v;
        }
    }
    UbMatrix::new(a, b, partition.clone()).expect("valid coordinates")
}

fn median_secs(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|x, y| x.partial_cmp(y).unwrap());
    samples[samples.len() / 2]
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let configs: Vec<(String, usize, usize)> = match args.preset {
        Some(Preset::Proteomics) => vec![("proteomics".into(), 7, 107)],
        Some(Preset::Imaging) => vec![("imaging".into(), 5, 227)],
        None => {
            let parse = |s: &str| -> Result<Vec<usize>> {
                s.split(',')
                    .map(|t| {
                        t.trim().parse::<usize>().map_err(|_| {
                            Error::InvalidParameter(format!("bad grid value {t:?}"))
                        })
                    })
                    .collect()
            };
            let mut out = Vec::new();
            for &k in &parse(&args.k_grid)? {
                for &p in &parse(&args.p_grid)? {
                    if p >= 2 * k {
                        out.push((format!("K={k},p={p}"), k, p));
                    }
                }
            }
            out
        }
    };
    let ops: Vec<&str> = args.ops.split(',').map(str::trim).collect();
    for op in &ops {
        if !matches!(*op, "det" | "inv" | "eig") {
            return Err(Error::InvalidParameter(format!(
                "unknown bench op {op:?} (det, inv, eig)"
            )));
        }
    }
    let iters = args.iterations.max(1);

    let mut rows = Vec::new();
    for (name, k, p) in configs {
        let partition = even_partition(k, p)?;
        let x = bench_instance(&partition, args.seed);
        let dense = x.expand();
        for op in &ops {
            let coord = median_secs(
                (0..iters)
                    .map(|_| {
                        let t = Instant::now();
                        match *op {
                            "det" => {
                                std::hint::black_box(x.determinant());
                            }
                            "inv" => {
                                std::hint::black_box(x.inverse().expect("SPD"));
                            }
                            _ => {
                                std::hint::black_box(x.eigenvalues());
                            }
                        }
                        t.elapsed().as_secs_f64()
                    })
                    .collect(),
            );
            // One dense pass is enough: it is the slow side by construction.
            // Dense Jacobi above p = 256 takes minutes and is skipped.
            let dense_time = match *op {
                "det" => {
                    let t = Instant::now();
                    std::hint::black_box(dense.determinant()?);
                    Some(t.elapsed().as_secs_f64())
                }
                "inv" => {
                    let t = Instant::now();
                    std::hint::black_box(dense.inverse()?);
                    Some(t.elapsed().as_secs_f64())
                }
                _ if p <= 256 => {
                    let t = Instant::now();
                    std::hint::black_box(dense.symmetric_eigen()?);
                    Some(t.elapsed().as_secs_f64())
                }
                _ => None,
            };
            rows.push((name.clone(), k, p, op.to_string(), coord, dense_time));
        }
    }

    if args.json {
        let items: Vec<_> = rows
            .iter()
            .map(|(name, k, p, op, coord, dense)| {
                json!({
                    "config": name,
                    "blocks": k,
                    "dimension": p,
                    "op": op,
                    "coordinate_seconds": coord,
                    "dense_seconds": dense,
                    "speedup": dense.map(|d| d / coord),
                })
            })
            .collect();
        print!("{}", to_json_line(&json!({ "results": items })));
    } else {
        println!(
            "{:<14} {:>3} {:>5} {:<4} {:>12} {:>12} {:>10}",
            "config", "K", "p", "op", "coord (s)", "dense (s)", "speedup"
        );
        for (name, k, p, op, coord, dense) in &rows {
            let (dense_s, speedup) = match dense {
                Some(d) => (format!("{d:>12.3e}"), format!("{:>10.0}", d / coord)),
                None => (format!("{:>12}", "skipped"), format!("{:>10}", "-")),
            };
            println!("{name:<14} {k:>3} {p:>5} {op:<4} {coord:>12.3e} {dense_s} {speedup}");
        }
    }
    Ok(())
}
