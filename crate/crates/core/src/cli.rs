//! Experiment runner behind the `matfun-norm` binary.
//!
//! Rows mirror the usual results table: matrix, function, leading singular
//! value, relative gap to the second estimate, total outer steps, total and
//! average inner dimensions and wall time, followed by the convergence flag and
//! the residual-gap bound. CSV and JSON keep full precision so that the files
//! parse back to identical rows; the summary printed to stderr rounds the
//! singular values to six significant digits.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{exp_norm_bound, power_method};
use crate::funcatalog::MatFn;
use crate::inner::{InnerConfig, InnerMethod, DEFAULT_LAG, DEFAULT_MAX_DIM};
use crate::matrices::{build_operator, MatrixKind, MatrixSpec, Operator};
use crate::outer::{run, RunConfig, RunReport, DEFAULT_M_MAX};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Method {
    Lanczos,
    Power,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lanczos" => Ok(Method::Lanczos),
            "power" => Ok(Method::Power),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub matrices: Vec<MatrixSpec>,
    pub functions: Vec<MatFn>,
    pub method: Method,
    pub inner: InnerMethod,
    pub eps_out: f64,
    pub m_max: usize,
    pub relax: bool,
    pub seed: u64,
    pub num_triplets: usize,
}

impl ExperimentConfig {
    pub fn new(matrices: Vec<MatrixSpec>, functions: Vec<MatFn>, eps_out: f64) -> Self {
        Self {
            matrices,
            functions,
            method: Method::Lanczos,
            inner: InnerMethod::StandardKrylov,
            eps_out,
            m_max: DEFAULT_M_MAX,
            relax: false,
            seed: 0,
            num_triplets: 1,
        }
    }

    pub fn run_config(&self) -> RunConfig {
        let mut cfg = RunConfig::new(self.eps_out);
        cfg.m_max = self.m_max;
        cfg.method = self.inner;
        cfg.relax = self.relax;
        cfg.seed = self.seed;
        cfg.num_triplets = self.num_triplets;
        cfg
    }

    /// Inner settings of the power method: tolerance `eps_out / 100`.
    pub fn power_inner(&self) -> InnerConfig {
        InnerConfig {
            method: self.inner,
            eps_inner: self.eps_out / 100.0,
            lag: DEFAULT_LAG,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub matrix: String,
    pub function: String,
    pub sigma: f64,
    /// `(sigma_1 - sigma_2) / sigma_1`; empty for the power method.
    pub rel_gap_second: Option<f64>,
    pub outer: usize,
    pub inner_total: usize,
    pub inner_avg: f64,
    pub time_s: f64,
    pub converged: bool,
    pub gap_bound: Option<f64>,
}

impl ReportRow {
    pub const COLUMNS: [&'static str; 10] = [
        "matrix",
        "function",
        "sigma",
        "rel_gap_second",
        "outer",
        "inner_total",
        "inner_avg",
        "time_s",
        "converged",
        "gap_bound",
    ];

    pub fn from_report(matrix: &str, f: MatFn, r: &RunReport) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        Self {
            matrix: matrix.to_string(),
            function: f.token().to_string(),
            sigma: r.sigma(),
            rel_gap_second: finite(r.rel_gap_second()),
            outer: r.outer_iters,
            inner_total: r.inner_total,
            inner_avg: r.inner_avg,
            time_s: r.wall_time,
            converged: r.converged,
            gap_bound: finite(r.gap_bound()),
        }
    }
}

/// `x` rounded to six significant digits, in the table's notation.
pub fn six_digits(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-3..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

impl fmt::Display for ReportRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2e}"));
        write!(
            f,
            "{:<8} {:<8} {:>14} {:>10} {:>6} {:>8} {:>7.1} {:>9.2} {:<5} {:>10}",
            self.matrix,
            self.function,
            six_digits(self.sigma),
            opt(self.rel_gap_second),
            self.outer,
            self.inner_total,
            self.inner_avg,
            self.time_s,
            self.converged,
            opt(self.gap_bound),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRow {
    pub matrix: String,
    pub function: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Experiment {
    pub rows: Vec<ReportRow>,
    pub skipped: Vec<SkippedRow>,
}

impl Experiment {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// Operators for every matrix in the config; a missing file becomes a skip reason.
fn build_all(matrices: &[MatrixSpec]) -> Result<Vec<std::result::Result<Operator, String>>> {
    matrices
        .iter()
        .map(|spec| match build_operator(spec) {
            Ok(op) => Ok(Ok(op)),
            Err(Error::Io(e)) if matches!(spec.kind, MatrixKind::A4 { .. } | MatrixKind::File { .. }) => {
                Ok(Err(format!("cannot read matrix file: {e}")))
            }
            Err(e) => Err(e),
        })
        .collect()
}

/// One row per (matrix, function), computed in parallel and returned in config order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let ops = build_all(&cfg.matrices)?;
    let run_cfg = cfg.run_config();
    run_cfg.validate()?;
    let jobs: Vec<(usize, MatFn)> = (0..cfg.matrices.len())
        .flat_map(|i| cfg.functions.iter().map(move |&f| (i, f)))
        .collect();
    let results: Vec<Result<std::result::Result<ReportRow, SkippedRow>>> = jobs
        .par_iter()
        .map(|&(i, f)| {
            let label = cfg.matrices[i].label();
            let op = match &ops[i] {
                Ok(op) => op,
                Err(reason) => {
                    return Ok(Err(SkippedRow {
                        matrix: label,
                        function: f.token().to_string(),
                        reason: reason.clone(),
                    }))
                }
            };
            let report = match cfg.method {
                Method::Lanczos => run(op.as_ref(), f, &run_cfg)?,
                Method::Power => power_method(op.as_ref(), f, cfg.eps_out, cfg.m_max, &cfg.power_inner(), cfg.seed)?,
            };
            Ok(Ok(ReportRow::from_report(&label, f, &report)))
        })
        .collect();
    let mut out = Experiment::default();
    for r in results {
        match r? {
            Ok(row) => out.rows.push(row),
            Err(skip) => out.skipped.push(skip),
        }
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(columns: &[&str], rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(input: impl Read) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_rows<T: Serialize>(columns: &[&str], rows: &[T], format: Format, mut out: impl Write) -> Result<()> {
    match format {
        Format::Csv => write_csv(columns, rows, out),
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletRow {
    pub matrix: String,
    pub function: String,
    pub index: usize,
    pub sigma_fixed: f64,
    pub sigma_relaxed: f64,
    /// `|sigma_relaxed - sigma_fixed| / sigma_relaxed`
    pub rel_discrepancy: f64,
    /// Relative computed residual of the triplet in the fixed run.
    pub residual_fixed: f64,
}

impl TripletRow {
    pub const COLUMNS: [&'static str; 7] = [
        "matrix",
        "function",
        "index",
        "sigma_fixed",
        "sigma_relaxed",
        "rel_discrepancy",
        "residual_fixed",
    ];
}

#[derive(Debug, Clone)]
pub struct MultiTriplet {
    pub rows: Vec<TripletRow>,
    /// Summaries of the fixed and the relaxed run per (matrix, function).
    pub runs: Vec<(ReportRow, ReportRow)>,
    pub skipped: Vec<SkippedRow>,
}

/// Leading `num_triplets` singular values with fixed and with relaxed inner
/// tolerances. Both runs stop on the criterion for the largest value.
pub fn run_multi_triplet(cfg: &ExperimentConfig) -> Result<MultiTriplet> {
    if cfg.num_triplets < 2 {
        return Err(Error::InvalidArgument("multi-triplet runs need at least two triplets".into()));
    }
    let ops = build_all(&cfg.matrices)?;
    let mut fixed_cfg = cfg.run_config();
    fixed_cfg.relax = false;
    fixed_cfg.validate()?;
    let relaxed_cfg = RunConfig { relax: true, ..fixed_cfg };
    let mut out = MultiTriplet {
        rows: Vec::new(),
        runs: Vec::new(),
        skipped: Vec::new(),
    };
    for (spec, op) in cfg.matrices.iter().zip(&ops) {
        let label = spec.label();
        for &f in &cfg.functions {
            let op = match op {
                Ok(op) => op,
                Err(reason) => {
                    out.skipped.push(SkippedRow {
                        matrix: label.clone(),
                        function: f.token().to_string(),
                        reason: reason.clone(),
                    });
                    continue;
                }
            };
            let (fixed, relaxed) = rayon::join(|| run(op.as_ref(), f, &fixed_cfg), || run(op.as_ref(), f, &relaxed_cfg));
            let (fixed, relaxed) = (fixed?, relaxed?);
            for (i, (a, b)) in fixed.triplets.iter().zip(&relaxed.triplets).enumerate() {
                out.rows.push(TripletRow {
                    matrix: label.clone(),
                    function: f.token().to_string(),
                    index: i + 1,
                    sigma_fixed: a.theta,
                    sigma_relaxed: b.theta,
                    rel_discrepancy: (b.theta - a.theta).abs() / b.theta,
                    residual_fixed: a.computed_residual / a.theta,
                });
            }
            out.runs.push((ReportRow::from_report(&label, f, &fixed), ReportRow::from_report(&label, f, &relaxed)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpBoundRow {
    pub matrix: String,
    pub sign: i8,
    pub alpha: f64,
    pub bound: f64,
    pub bound_converged: bool,
    /// `||exp(sign A)||` from the bidiagonalization, when requested.
    pub measured: Option<f64>,
    pub ratio: Option<f64>,
}

impl ExpBoundRow {
    pub const COLUMNS: [&'static str; 7] = ["matrix", "sign", "alpha", "bound", "bound_converged", "measured", "ratio"];
}

#[derive(Debug, Parser)]
#[command(name = "matfun-norm", version, about = "2-norm and leading singular triplets of f(A) by inexact Lanczos bidiagonalization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One table row per (matrix, function).
    Run(RunArgs),
    /// Same as `run --method power`.
    Power(RunArgs),
    /// Hermitian-part bound exp(alpha) for ||exp(+-A)||.
    Expbound(ExpBoundArgs),
    /// Leading singular values with fixed and relaxed inner tolerances.
    Triplets(RunArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Matrix spec such as `A2`, `A5:n=2500`, `A1:n=1000:seed=3` or `A4:path=e20r1000.mtx`.
    #[arg(long = "matrix")]
    pub matrices: Vec<MatrixSpec>,
    #[arg(long = "function", default_value = "exp")]
    pub functions: Vec<MatFn>,
    #[arg(long, value_enum, default_value_t = Method::Lanczos)]
    pub method: Method,
    /// Inner solver: `krylov` or `eksm`.
    #[arg(long, default_value = "krylov")]
    pub inner: InnerMethod,
    #[arg(long, default_value_t = 1e-4)]
    pub eps_out: f64,
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: usize,
    /// Relax the inner tolerance as the outer iteration converges.
    #[arg(long)]
    pub relax: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub triplets: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl RunArgs {
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            matrices: self.matrices.clone(),
            functions: self.functions.clone(),
            method: self.method,
            inner: self.inner,
            eps_out: self.eps_out,
            m_max: self.m_max,
            relax: self.relax,
            seed: self.seed,
            num_triplets: self.triplets,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExpBoundArgs {
    #[arg(long = "matrix")]
    pub matrices: Vec<MatrixSpec>,
    /// `1`, `-1`, or both when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<i8>,
    /// Also compute ||exp(sign A)|| by bidiagonalization.
    #[arg(long)]
    pub measure: bool,
    #[arg(long, default_value_t = 1e-4)]
    pub eps_out: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn output(out: &OutputArgs) -> Result<Box<dyn Write>> {
    Ok(match &out.out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn report_skipped(skipped: &[SkippedRow]) {
    for s in skipped {
        eprintln!("skipped {} / {}: {}", s.matrix, s.function, s.reason);
    }
}

fn exp_bounds(args: &ExpBoundArgs) -> Result<Vec<ExpBoundRow>> {
    let signs: Vec<i8> = match args.sign {
        Some(s @ (1 | -1)) => vec![s],
        Some(s) => return Err(Error::InvalidArgument(format!("sign must be 1 or -1, got {s}"))),
        None => vec![1, -1],
    };
    let ops = build_all(&args.matrices)?;
    let mut rows = Vec::new();
    for (spec, op) in args.matrices.iter().zip(&ops) {
        let op = match op {
            Ok(op) => op,
            Err(reason) => {
                eprintln!("skipped {}: {reason}", spec.label());
                continue;
            }
        };
        for &sign in &signs {
            let b = exp_norm_bound(op.as_ref(), f64::from(sign))?;
            let measured = if args.measure {
                let f = if sign > 0 { MatFn::Exp } else { MatFn::ExpNeg };
                Some(run(op.as_ref(), f, &RunConfig::new(args.eps_out))?.sigma())
            } else {
                None
            };
            rows.push(ExpBoundRow {
                matrix: spec.label(),
                sign,
                alpha: b.alpha,
                bound: b.bound,
                bound_converged: b.converged,
                measured,
                ratio: measured.map(|m| b.bound / m),
            });
        }
    }
    Ok(rows)
}

/// Runs the parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => run_table(&args, args.method),
        Command::Power(args) => run_table(&args, Method::Power),
        Command::Triplets(args) if args.triplets <= 1 => run_table(&args, args.method),
        Command::Triplets(args) => {
            let res = run_multi_triplet(&args.config())?;
            report_skipped(&res.skipped);
            for (fixed, relaxed) in &res.runs {
                eprintln!("fixed   {fixed}");
                eprintln!("relaxed {relaxed}");
            }
            write_rows(&TripletRow::COLUMNS, &res.rows, args.output.format, output(&args.output)?)?;
            let ok = res.runs.iter().all(|(a, b)| a.converged && b.converged);
            Ok(if ok { 0 } else { 1 })
        }
        Command::Expbound(args) => {
            let rows = exp_bounds(&args)?;
            write_rows(&ExpBoundRow::COLUMNS, &rows, args.output.format, output(&args.output)?)?;
            Ok(if rows.iter().all(|r| r.bound_converged) { 0 } else { 1 })
        }
    }
}

fn run_table(args: &RunArgs, method: Method) -> Result<i32> {
    let mut cfg = args.config();
    cfg.method = method;
    let res = run_experiment(&cfg)?;
    report_skipped(&res.skipped);
    for row in &res.rows {
        eprintln!("{row}");
    }
    write_rows(&ReportRow::COLUMNS, &res.rows, args.output.format, output(&args.output)?)?;
    Ok(if res.all_converged() { 0 } else { 1 })
}
