use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rowact_core::bspline::{evaluate, fit_curve_with, sample_curve, FitRhs, PointCloud3};
use rowact_core::datagen::consistent_system;
use rowact_core::mmio::{fmt_f64, read_matrix_market, read_vector, write_matrix_market, write_vector};
use rowact_core::theory::bound_report;
use rowact_core::{solve, SolveReport, SolverConfig, SolverMethod};
use serde::Serialize;

use crate::{bench_csv, cmd_bench, cmd_sweep, sweep_csv, BenchSpec, MatrixKind, MatrixShape, MethodParams, SweepSpec};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] rowact_core::Error),
    #[error("solver did not converge (final rse {0:e})")]
    NotConverged(f64),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(rowact_core::Error::Io { .. } | rowact_core::Error::Parse { .. }) => EXIT_IO,
            CliError::Core(_) => EXIT_USAGE,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "rowact", version, about = "Greedy row-action solvers with heavy-ball momentum")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded test system: A.mtx, b.vec and xstar.vec.
    Gen(GenArgs),
    /// Run one solver configuration on a Matrix Market system.
    Solve(SolveArgs),
    /// Compare methods over seeded synthetic matrices (median iterations).
    Bench(BenchArgs),
    /// Evaluate an (alpha, beta) grid for a momentum method.
    Sweep(SweepArgs),
    /// Fit a cubic B-spline curve to 3-D points.
    Fit(FitArgs),
    /// Contraction constants and the admissible momentum bound, as JSON.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Gaussian,
    Udv,
}

impl From<KindArg> for MatrixKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Gaussian => MatrixKind::Gaussian,
            KindArg::Udv => MatrixKind::Udv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Kaczmarz,
    Eta,
    Mwrk,
    Mmwrk,
    Fdbk,
    Mfdbk,
}

impl From<MethodArg> for SolverMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Kaczmarz => SolverMethod::Kaczmarz,
            MethodArg::Eta => SolverMethod::Eta,
            MethodArg::Mwrk => SolverMethod::Mwrk,
            MethodArg::Mmwrk => SolverMethod::Mmwrk,
            MethodArg::Fdbk => SolverMethod::Fdbk,
            MethodArg::Mfdbk => SolverMethod::Mfdbk,
        }
    }
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long, value_enum, default_value = "udv")]
    pub kind: KindArg,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Rank of a UDV matrix [default: max(1, min(m, n) / 10)].
    #[arg(long)]
    pub r: Option<usize>,
    /// Singular values are drawn from (1, kappa) [default: max(2, min(m, n) / 10)].
    #[arg(long)]
    pub kappa: Option<f64>,
}

impl MatrixArgs {
    fn shape(&self) -> MatrixShape {
        let tenth = (self.m.min(self.n) / 10).max(1);
        let kind: MatrixKind = self.kind.into();
        let (r, kappa) = match kind {
            MatrixKind::Gaussian => (self.m.min(self.n), 1.0),
            MatrixKind::Udv => (self.r.unwrap_or(tenth), self.kappa.unwrap_or((tenth as f64).max(2.0))),
        };
        MatrixShape {
            kind,
            m: self.m,
            n: self.n,
            r,
            kappa,
        }
    }
}

#[derive(Debug, Args)]
pub struct StopArgs {
    /// Threshold on the squared relative error.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long = "max-iters", default_value_t = 100_000)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub rhs: PathBuf,
    /// Reference solution for the error criterion; without it the run stops
    /// on the relative residual.
    #[arg(long)]
    pub xstar: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mmwrk")]
    pub method: MethodArg,
    /// Step size [default: per method].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Momentum weight [default: per method].
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Seed of the Gaussian sketch (eta only).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write a k,rse,set_size CSV here.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the final iterate as a Matrix Market vector.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    /// Include wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
    /// Exit with status 3 when the run does not converge.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mwrk,mmwrk,fdbk,mfdbk")]
    pub methods: Vec<MethodArg>,
    /// Number of seeds.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// First seed; runs use seed, seed + 1, ...
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Step size for the momentum methods [default: per method].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Momentum weight for the momentum methods [default: per method].
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Add a wall_ms column (makes the output nondeterministic).
    #[arg(long)]
    pub timing: bool,
    /// CSV destination [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "mmwrk")]
    pub method: MethodArg,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1,1.25,1.5,1.75")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75")]
    pub betas: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[command(flatten)]
    pub stop: StopArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Built-in sample curve (1: helix, 2: knot).
    #[arg(long, conflicts_with = "points")]
    pub curve: Option<u8>,
    /// CSV of points with x,y,z columns (an index column is ignored).
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Number of samples of the built-in curve.
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    /// Number of control points.
    #[arg(long = "n-ctrl", default_value_t = 100)]
    pub n_ctrl: usize,
    #[arg(long, value_enum, default_value = "mfdbk")]
    pub method: MethodArg,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Solve against the raw data instead of its projection onto the spline space.
    #[arg(long = "raw-rhs")]
    pub raw_rhs: bool,
    /// Control net CSV destination [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write this many samples of the fitted curve as CSV.
    #[arg(long = "curve-out")]
    pub curve_out: Option<PathBuf>,
    #[arg(long = "curve-samples", default_value_t = 1000)]
    pub curve_samples: usize,
    /// Write the report JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Rate constant in (0, 1]; taken from the matrix when omitted.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `text` to `path`, or stdout when `path` is `None`.
fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn history_csv(report: &SolveReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "rse", "set_size"]).expect("in-memory write");
    for e in report.history.iter().flatten() {
        w.write_record([e.k.to_string(), fmt_f64(e.rse), e.set_size.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Serialize)]
struct TimedReport<'a> {
    #[serde(flatten)]
    report: &'a SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_ms: Option<f64>,
}

/// Report JSON without the per-step history, which goes to its own CSV.
fn report_json(report: &SolveReport, timing: bool) -> String {
    let report = &SolveReport {
        history: None,
        ..report.clone()
    };
    to_json(&TimedReport {
        report,
        wall_ms: timing.then_some(report.wall_time.as_secs_f64() * 1e3),
    })
}

fn method_config(method: SolverMethod, alpha: Option<f64>, beta: Option<f64>) -> SolverConfig {
    let (a0, b0) = method.default_alpha_beta();
    SolverConfig::new(method).with_alpha_beta(alpha.unwrap_or(a0), beta.unwrap_or(b0))
}

fn run_gen(args: &GenArgs) -> CliResult<()> {
    let spec = args.matrix.shape().with_seed(args.seed);
    let a = spec.generate()?;
    let (b, xs) = consistent_system(&a)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    write_matrix_market(args.out.join("A.mtx"), &a)?;
    write_vector(args.out.join("b.vec"), &b)?;
    write_vector(args.out.join("xstar.vec"), &xs)?;
    Ok(())
}

fn run_solve(args: &SolveArgs) -> CliResult<()> {
    let a = read_matrix_market(&args.matrix)?;
    let b = read_vector(&args.rhs)?;
    let xs = args.xstar.as_ref().map(read_vector).transpose()?;
    let cfg = SolverConfig {
        theta: args.theta,
        rse_tol: args.stop.tol,
        max_iters: args.stop.max_iters,
        seed: args.seed,
        record_history: args.history.is_some(),
        ..method_config(args.method.into(), args.alpha, args.beta)
    };
    let out = solve(&a, &b, xs.as_deref(), &cfg)?;
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(h) = &args.history {
        emit(Some(h), &history_csv(&out.report))?;
    }
    if let Some(p) = &args.solution {
        write_vector(p, &out.x)?;
    }
    emit(args.out.as_deref(), &report_json(&out.report, args.timing))?;
    if args.strict && !out.report.converged {
        return Err(CliError::NotConverged(out.report.final_rse));
    }
    Ok(())
}

fn run_bench(args: &BenchArgs) -> CliResult<()> {
    let methods = args
        .methods
        .iter()
        .map(|&m| {
            let method: SolverMethod = m.into();
            let mut p = MethodParams::defaults(method);
            p.theta = args.theta;
            if method.has_momentum() {
                p.alpha = args.alpha.unwrap_or(p.alpha);
                p.beta = args.beta.unwrap_or(p.beta);
            }
            p
        })
        .collect();
    let spec = BenchSpec {
        matrices: vec![args.matrix.shape()],
        methods,
        seeds: (args.seed..args.seed + args.seeds).collect(),
        rse_tol: args.stop.tol,
        max_iters: args.stop.max_iters,
    };
    let rows = cmd_bench(&spec)?;
    emit(args.out.as_deref(), &bench_csv(&rows, args.timing))
}

fn run_sweep(args: &SweepArgs) -> CliResult<()> {
    let spec = SweepSpec {
        matrix: args.matrix.shape().with_seed(args.seed),
        method: args.method.into(),
        theta: args.theta,
        alphas: args.alphas.clone(),
        betas: args.betas.clone(),
        rse_tol: args.stop.tol,
        max_iters: args.stop.max_iters,
    };
    let rows = cmd_sweep(&spec)?;
    emit(args.out.as_deref(), &sweep_csv(&rows))
}

/// Reads x,y,z columns from a headed CSV.
fn read_points(path: &Path) -> CliResult<PointCloud3> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| CliError::Usage(format!("{}: missing column '{name}'", path.display())))
    };
    let (ix, iy, iz) = (col("x")?, col("y")?, col("z")?);
    let mut pts = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let get = |i: usize| -> CliResult<f64> {
            rec.get(i).unwrap_or("").trim().parse().map_err(|_| {
                CliError::Core(rowact_core::Error::Parse {
                    path: path.to_path_buf(),
                    line: line + 2,
                    msg: "expected a number".into(),
                })
            })
        };
        pts.push([get(ix)?, get(iy)?, get(iz)?]);
    }
    Ok(PointCloud3::new(pts)?)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Core(rowact_core::Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{other:?}"),
        }),
    }
}

fn run_fit(args: &FitArgs) -> CliResult<()> {
    let points = match (&args.points, args.curve) {
        (Some(p), _) => read_points(p)?,
        (None, Some(c)) => sample_curve(c, args.m)?.0,
        (None, None) => return Err(CliError::Usage("fit needs --curve or --points".into())),
    };
    let cfg = SolverConfig {
        theta: args.theta,
        rse_tol: args.stop.tol,
        max_iters: args.stop.max_iters,
        record_history: args.history.is_some(),
        ..method_config(args.method.into(), args.alpha, args.beta)
    };
    let rhs = if args.raw_rhs { FitRhs::Raw } else { FitRhs::Projected };
    let fit = fit_curve_with(&points, args.n_ctrl, &cfg, rhs)?;
    if let Some(p) = &args.curve_out {
        let samples = args.curve_samples.max(2);
        let pts = (0..samples)
            .map(|i| evaluate(&fit.knots, &fit.control, i as f64 / (samples - 1) as f64))
            .collect::<rowact_core::Result<Vec<_>>>()?;
        emit(Some(p), &PointCloud3::new(pts)?.to_csv())?;
    }
    if let Some(h) = &args.history {
        emit(Some(h), &history_csv(&fit.report))?;
    }
    if let Some(r) = &args.report {
        emit(Some(r), &report_json(&fit.report, false))?;
    }
    emit(args.out.as_deref(), &fit.control.to_csv())?;
    if args.strict && !fit.report.converged {
        return Err(CliError::NotConverged(fit.report.final_rse));
    }
    Ok(())
}

fn run_bounds(args: &BoundsArgs) -> CliResult<()> {
    let a = args.matrix.as_ref().map(read_matrix_market).transpose()?;
    let report = bound_report(a.as_ref(), args.alpha, args.beta, args.rho)?;
    emit(args.out.as_deref(), &to_json(&report))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Solve(a) => run_solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Fit(a) => run_fit(a),
        Command::Bounds(a) => run_bounds(a),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rowact: {e}");
            e.exit_code()
        }
    }
}
