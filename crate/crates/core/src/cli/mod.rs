//! Batch front end: problem files in, CSV traces and JSON reports out.
//!
//! Exit codes are 0 (converged), 2 (iteration budget exhausted) and 1 (any
//! error). Errors go to stderr as `error[CODE]: message`.

mod problem;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::descent::{descend_with, DescentConfig, DescentError, DescentProblem, DescentRecord};
use crate::geodesics::{geodesic_integrate_with, GeodesicError, GeodesicState};
use crate::geometry::{GeometryError, ProjectionConfig, ProjectionFailure, TangentFrame};
use crate::triangular::TriangularError;

pub use problem::{load_problem, parse_problem, Problem, ProblemFile};

/// Emitted ambient points must satisfy the original constraints to this
/// multiple of the projection tolerance.
pub const AMBIENT_SLACK: f64 = 10.0;

#[derive(Debug, Clone, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: Arc<std::io::Error> },
    #[error("line {line}, column {column}: {message}")]
    Problem {
        line: usize,
        column: usize,
        code: &'static str,
        message: String,
    },
    #[error(transparent)]
    Triangular(#[from] TriangularError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Descent(#[from] DescentError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
    #[error("start point is off the manifold (residual {residual:e}): {reason}")]
    StartOffManifold { residual: f64, reason: String },
    #[error("projection failed: {0}")]
    Projection(ProjectionFailure),
    #[error("ambient point violates the original constraints (residual {residual:e} > {tol:e})")]
    ConstraintCheck { residual: f64, tol: f64 },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IO",
            CliError::Problem { code, .. } => code,
            CliError::Triangular(e) => e.code(),
            CliError::Geometry(e) => e.code(),
            CliError::Descent(e) => e.code(),
            CliError::Geodesic(e) => e.code(),
            CliError::StartOffManifold { .. } => "START_OFF_MANIFOLD",
            CliError::Projection(_) => "PROJECTION_FAILED",
            CliError::ConstraintCheck { .. } => "CONSTRAINT_CHECK",
            CliError::Usage(_) => "USAGE",
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source: Arc::new(source),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "whitney-descent",
    version,
    about = "Derivative-free optimization on triangular polynomial manifolds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run probabilistic descent
    Run(RunArgs),
    /// Project one tangent step from the start point back onto the manifold
    Project(ProjectArgs),
    /// Integrate a geodesic from the start point
    Geodesic(GeodesicArgs),
    /// Check the triangular structure and print the partition
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Residual tolerance for projections
    #[arg(long, default_value_t = 1e-10)]
    pub proj_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub proj_max_iter: usize,
    /// Projection iterates farther than this from the tangent start fail
    #[arg(long, default_value_t = 0.5)]
    pub oracle_radius: f64,
}

impl CommonArgs {
    pub fn projection(&self) -> ProjectionConfig {
        ProjectionConfig {
            residual_tol: self.proj_tol,
            max_iters: self.proj_max_iter,
            oracle_radius: self.oracle_radius,
            ..ProjectionConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0, conflicts_with = "seeds")]
    pub seed: u64,
    /// Inclusive seed range `a..b`, run in parallel
    #[arg(long, value_parser = parse_seed_range)]
    pub seeds: Option<RangeInclusive<u64>>,
    #[arg(long, default_value_t = 0.25)]
    pub alpha0: f64,
    /// Step size cap (`inf` allowed)
    #[arg(long, default_value_t = 1.0)]
    pub alpha_max: f64,
    /// Forcing constant C in ρ(α) = Cα²
    #[arg(long)]
    pub c_forcing: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    /// CSV trace; with --seeds, `{seed}` in the path is replaced by the seed
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON report (stdout if absent)
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Tangent coordinates, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub w: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Initial velocity in tangent coordinates, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub tangent: Vec<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub duration: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// CSV of the integrated states
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

fn parse_seed_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected `a..b`")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..=b)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub retained_variables: Vec<String>,
    pub final_reduced: Vec<f64>,
    pub variables: Vec<String>,
    pub final_ambient: Vec<f64>,
    pub final_objective: f64,
    pub start_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_alpha: f64,
    pub forcing_constant: f64,
    pub ambient_residual: f64,
    pub trace: Option<String>,
}

/// Shortest round-trip decimal; stable across runs.
fn num(x: f64) -> String {
    format!("{x}")
}

fn trace_path(template: &Path, seed: u64, sweep: bool) -> PathBuf {
    let s = template.to_string_lossy();
    if s.contains("{seed}") {
        PathBuf::from(s.replace("{seed}", &seed.to_string()))
    } else if sweep {
        let stem = template
            .file_stem()
            .map(|x| x.to_string_lossy().into_owned())
            .unwrap_or_default();
        let name = match template.extension() {
            Some(ext) => format!("{stem}.seed{seed}.{}", ext.to_string_lossy()),
            None => format!("{stem}.seed{seed}"),
        };
        template.with_file_name(name)
    } else {
        template.to_path_buf()
    }
}

struct TraceWriter {
    path: PathBuf,
    out: csv::Writer<BufWriter<File>>,
}

impl TraceWriter {
    fn create(path: &Path, header: Vec<String>) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: csv::Writer::from_writer(BufWriter::new(file)),
        };
        w.row(header)?;
        Ok(w)
    }

    fn row(&mut self, fields: Vec<String>) -> Result<(), CliError> {
        self.out
            .write_record(&fields)
            .map_err(|e| CliError::io(&self.path, std::io::Error::other(e)))
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// One descent run; writes the trace as records arrive.
pub fn run_descent(problem: &Problem, cfg: &DescentConfig, trace: Option<&Path>) -> Result<RunReport, CliError> {
    let objective = &problem.objective;
    let dp = DescentProblem {
        partition: problem.partition.clone(),
        objective: |z: &[f64]| objective.evaluate(z),
        start: problem.start.clone(),
    };
    let tol = AMBIENT_SLACK * cfg.projection.residual_tol;
    let mut writer = match trace {
        Some(path) => {
            let mut header: Vec<String> = ["j", "alpha", "f", "event"].map(String::from).to_vec();
            header.extend(problem.retained_names());
            Some(TraceWriter::create(path, header)?)
        }
        None => None,
    };
    let mut failure: Option<CliError> = None;
    let result = descend_with(&dp, cfg, |r: &DescentRecord| {
        if failure.is_some() {
            return;
        }
        let residual = problem.ambient_residual(r.ambient.as_slice());
        if residual.is_nan() || residual > tol {
            failure = Some(CliError::ConstraintCheck { residual, tol });
            return;
        }
        if let Some(w) = writer.as_mut() {
            let mut row = vec![r.j.to_string(), num(r.alpha), num(r.f), r.event.as_str().to_string()];
            row.extend(r.point.0.iter().map(|&x| num(x)));
            if let Err(e) = w.row(row) {
                failure = Some(e);
            }
        }
    });
    if let Some(w) = writer {
        w.finish()?;
    }
    let trace_result = result?;
    if let Some(e) = failure {
        return Err(e);
    }
    let ambient_residual = problem.ambient_residual(trace_result.final_ambient.as_slice());
    if ambient_residual.is_nan() || ambient_residual > tol {
        return Err(CliError::ConstraintCheck {
            residual: ambient_residual,
            tol,
        });
    }
    Ok(RunReport {
        seed: cfg.seed,
        retained_variables: problem.retained_names(),
        final_reduced: trace_result.final_point.0.clone(),
        variables: problem.variable_names(),
        final_ambient: trace_result.final_ambient.0.clone(),
        final_objective: trace_result.final_value,
        start_objective: trace_result.start_value,
        iterations: trace_result.iterations(),
        converged: trace_result.converged,
        final_alpha: trace_result.final_alpha,
        forcing_constant: trace_result.forcing_constant,
        ambient_residual,
        trace: trace.map(|p| p.display().to_string()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn descent_config(args: &RunArgs, seed: u64) -> DescentConfig {
    DescentConfig {
        alpha0: args.alpha0,
        alpha_max: args.alpha_max,
        c_forcing: args.c_forcing,
        max_iters: args.max_iter,
        seed,
        projection: args.common.projection(),
        ..DescentConfig::default()
    }
}

fn cmd_run(args: &RunArgs) -> Result<i32, CliError> {
    let problem = load_problem(&args.common.problem, &args.common.projection())?;
    let exit = |converged: bool| if converged { 0 } else { 2 };
    match &args.seeds {
        None => {
            let cfg = descent_config(args, args.seed);
            let trace = args.trace.as_deref().map(|t| trace_path(t, args.seed, false));
            let report = run_descent(&problem, &cfg, trace.as_deref())?;
            write_json(&report, args.report.as_deref())?;
            Ok(exit(report.converged))
        }
        Some(range) => {
            let seeds: Vec<u64> = range.clone().collect();
            let reports = seeds
                .par_iter()
                .map(|&seed| {
                    let trace = args.trace.as_deref().map(|t| trace_path(t, seed, true));
                    run_descent(&problem, &descent_config(args, seed), trace.as_deref())
                })
                .collect::<Result<Vec<_>, _>>()?;
            let all = reports.iter().all(|r| r.converged);
            write_json(&serde_json::json!({ "runs": reports }), args.report.as_deref())?;
            Ok(exit(all))
        }
    }
}

fn cmd_project(args: &ProjectArgs) -> Result<i32, CliError> {
    let cfg = args.common.projection();
    let problem = load_problem(&args.common.problem, &cfg)?;
    let frame = TangentFrame::new(problem.constraint_set(), problem.start.clone())?;
    if args.w.len() != frame.tangent_dim() {
        return Err(CliError::Usage(format!(
            "--w needs {} tangent coordinates, got {}",
            frame.tangent_dim(),
            args.w.len()
        )));
    }
    let p = frame.project(&args.w, &cfg).map_err(CliError::Projection)?;
    let residual = problem.constraint_set().max_residual(p.point.as_slice());
    write_json(
        &serde_json::json!({
            "retained_variables": problem.retained_names(),
            "base": problem.start.0,
            "w": args.w,
            "tangent_start": p.start.0,
            "point": p.point.0,
            "iterations": p.iterations,
            "residual": residual,
        }),
        None,
    )?;
    Ok(0)
}

fn cmd_geodesic(args: &GeodesicArgs) -> Result<i32, CliError> {
    let cfg = args.common.projection();
    let problem = load_problem(&args.common.problem, &cfg)?;
    let constraints = problem.constraint_set();
    let frame = TangentFrame::new(Arc::clone(&constraints), problem.start.clone())?;
    if args.tangent.len() != frame.tangent_dim() {
        return Err(CliError::Usage(format!(
            "--tangent needs {} coordinates, got {}",
            frame.tangent_dim(),
            args.tangent.len()
        )));
    }
    let v = frame.basis() * nalgebra::DVector::from_column_slice(&args.tangent);
    let state0 = GeodesicState {
        position: problem.start.0.clone(),
        velocity: v.as_slice().to_vec(),
        time: 0.0,
    };
    let names = problem.retained_names();
    let mut writer = match &args.trace {
        Some(path) => {
            let mut header = vec!["t".to_string()];
            header.extend(names.iter().cloned());
            header.extend(names.iter().map(|n| format!("d{n}")));
            let mut w = TraceWriter::create(path, header)?;
            w.row(state_row(&state0))?;
            Some(w)
        }
        None => None,
    };
    let mut failure = None;
    let end = geodesic_integrate_with(&constraints, &state0, args.duration, args.step, &cfg, |s| {
        if let Some(w) = writer.as_mut() {
            if failure.is_none() {
                failure = w.row(state_row(s)).err();
            }
        }
    });
    if let Some(w) = writer {
        w.finish()?;
    }
    let end = end?;
    if let Some(e) = failure {
        return Err(e);
    }
    write_json(
        &serde_json::json!({
            "retained_variables": names,
            "position": end.position,
            "velocity": end.velocity,
            "time": end.time,
            "initial_speed": state0.speed(),
            "final_speed": end.speed(),
            "residual": constraints.max_residual(&end.position),
        }),
        None,
    )?;
    Ok(0)
}

fn state_row(s: &GeodesicState) -> Vec<String> {
    let mut row = vec![num(s.time)];
    row.extend(s.position.iter().map(|&x| num(x)));
    row.extend(s.velocity.iter().map(|&x| num(x)));
    row
}

fn cmd_validate(args: &CommonArgs) -> Result<i32, CliError> {
    let problem = load_problem(&args.problem, &args.projection())?;
    let part = &problem.partition;
    let order = part.order();
    let names = |vars: &mut dyn Iterator<Item = usize>| vars.map(|v| order.name(v).to_string()).collect::<Vec<_>>();
    write_json(
        &serde_json::json!({
            "variables": problem.variable_names(),
            "free": names(&mut part.system().free_vars().iter().copied()),
            "algebraic": names(&mut part.system().algebraic_vars().iter().copied()),
            "eliminated": names(&mut part.eliminated().iter().copied()),
            "retained": names(&mut part.retained().iter().copied()),
            "manifold_dim": part.manifold_dim(),
            "g_star": part.g_star().iter().map(ToString::to_string).collect::<Vec<_>>(),
            "g_circ": part.g_circ().iter().map(ToString::to_string).collect::<Vec<_>>(),
            "start": problem.start.0,
        }),
        None,
    )?;
    Ok(0)
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Project(a) => cmd_project(a),
        Command::Geodesic(a) => cmd_geodesic(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

/// Parses `args`, runs the command, reports errors, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e);
            1
        }
    }
}
