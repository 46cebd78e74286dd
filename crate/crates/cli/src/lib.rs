//! Batch front end: scenario files in, JSON summaries and CSV tables out.
//!
//! Every command is deterministic: identical inputs produce byte-identical
//! output files, whatever the worker count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qlpen::corner::{
    check_corner_conditions, conformal_repair, divergence_repair, smooth_corner, ChargedCornerData,
    CornerConditionReport,
};
use qlpen::extension::{
    build_extension, monotone_mass_trace, spherical_warp_closed_form, trace_violations, FlowOptions, WarpOptions,
};
use qlpen::lab::{
    evaluate_inequality, pipeline_verify, ChainLink, Checklist, ExtensionSummary, InequalityReport, Scenario,
    ScheduleRow, Status, SWEEP_PARAMETERS,
};
use qlpen::surface::round_sphere_n;
use qlpen::{QlError, RNParams, Variant};

/// Version of the JSON summary layout (see `docs/formats.md`).
pub const SCHEMA_VERSION: u32 = 1;

/// Process exit codes.
pub mod exit {
    /// Hypotheses hold and every inequality holds within tolerance.
    pub const OK: i32 = 0;
    /// Command-line usage error (reported by the argument parser).
    pub const USAGE: i32 = 2;
    /// Inputs are outside the theorem's scope (a hypothesis fails).
    pub const HYPOTHESIS_FAIL: i32 = 3;
    /// Hypotheses hold but an inequality fails: would contradict the theorem.
    pub const CRITICAL: i32 = 4;
    /// Malformed or invalid configuration (parse errors carry line info).
    pub const CONFIG: i32 = 5;
    /// A numerical stage failed; the message is tagged with the stage.
    pub const STAGE: i32 = 6;
    /// Output could not be written.
    pub const IO: i32 = 7;
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "qlpen", version, about = "Numerical workbench for charged quasi-local Penrose inequalities")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "qlpen-out")]
    pub out: PathBuf,
    /// Override the polar grid size `numerics.grid_n`.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Override the absolute tolerance floor `numerics.tol`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Accepted for scripting; every computation is deterministic and no
    /// random numbers are used, so this changes nothing.
    #[arg(long, global = true)]
    pub seedless: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check hypotheses, evaluate the inequality and verify the pipeline.
    Run {
        /// Scenario file (TOML, or JSON with a `.json` extension).
        scenario: PathBuf,
        /// Skip the extension/smoothing pipeline (inequality only).
        #[arg(long)]
        no_pipeline: bool,
    },
    /// Evaluate a scenario over a grid of parameter values.
    Sweep {
        scenario: PathBuf,
        /// `name=start:stop:count`, optionally suffixed `:log` for geometric
        /// spacing. Repeat for a multi-dimensional grid (first axis slowest).
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        /// Also run the pipeline on every row (adds the m_adm column).
        #[arg(long)]
        pipeline: bool,
    },
    /// Smooth a glued RN corner over a δ schedule and report spikes and repairs.
    CornerDemo(CornerDemoArgs),
    /// Spherically symmetric extension with its monotone mass trace.
    ExtensionTrace(ExtensionTraceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CornerDemoArgs {
    #[arg(long, default_value_t = 1.0)]
    pub inner_mass: f64,
    #[arg(long, default_value_t = 0.5)]
    pub inner_charge: f64,
    #[arg(long, default_value_t = 1.2)]
    pub outer_mass: f64,
    #[arg(long, default_value_t = 0.4)]
    pub outer_charge: f64,
    /// Areal radius of the corner.
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    /// Areal radius where the outer side is truncated.
    #[arg(long, default_value_t = 2000.0)]
    pub r_max: f64,
    #[arg(long, default_value = "B")]
    pub variant: Variant,
    /// Comma-separated smoothing scales.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExtensionTraceArgs {
    #[arg(long, default_value_t = 1.0)]
    pub mbar: f64,
    #[arg(long, default_value_t = 0.5)]
    pub qbar: f64,
    /// Areal radius of the starting sphere.
    #[arg(long, default_value_t = 3.0)]
    pub r0: f64,
    /// Constant boundary warp.
    #[arg(long, default_value_t = 1.2)]
    pub u0: f64,
    /// Flow until the areal radius grows by this factor.
    #[arg(long, default_value_t = 1000.0)]
    pub areal_factor: f64,
    /// Flow step relative to the leaf radius.
    #[arg(long, default_value_t = 0.01)]
    pub step_ratio: f64,
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug)]
pub enum CliError {
    /// Scenario file could not be parsed.
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    /// Invalid configuration.
    Config(String),
    /// A numerical stage failed.
    Stage { stage: String, message: String },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Config(_) => exit::CONFIG,
            CliError::Stage { .. } => exit::STAGE,
            CliError::Io(_) => exit::IO,
        }
    }

    fn info(&self) -> ErrorInfo {
        let (kind, stage) = match self {
            CliError::Parse { .. } => ("parse", None),
            CliError::Config(_) => ("config", None),
            CliError::Stage { stage, .. } => ("stage", Some(stage.clone())),
            CliError::Io(_) => ("io", None),
        };
        let message = match self {
            CliError::Stage { message, .. } => message.clone(),
            other => other.to_string(),
        };
        ErrorInfo { kind: kind.into(), stage, message }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse { path, line, column, message } => {
                write!(f, "{}:{line}:{column}: parse error: {message}", path.display())
            }
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Stage { stage, message } => write!(f, "[stage {stage}] {message}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Map a core error onto the CLI taxonomy. Domain errors are configuration
/// problems; everything else is a failed stage.
fn classify(err: QlError, default_stage: &str) -> CliError {
    match err {
        QlError::Domain(m) => CliError::Config(m),
        QlError::Stage { stage, source } => CliError::Stage { stage: stage.into(), message: source.to_string() },
        other => CliError::Stage { stage: default_stage.into(), message: other.to_string() },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub stage: Option<String>,
    pub message: String,
}

// ---------------------------------------------------------------------------
// Scenario files

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |p| offset - p - 1) + 1;
    (line, column)
}

/// Parse scenario text; JSON if `json` is set, TOML otherwise.
pub fn parse_scenario(text: &str, json: bool, path: &Path) -> Result<Scenario, CliError> {
    if json {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    } else {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            CliError::Parse { path: path.to_path_buf(), line, column, message: e.message().to_string() }
        })
    }
}

/// Read, parse, apply overrides and validate a scenario file.
pub fn load_scenario(path: &Path, global: &GlobalOpts) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut sc = parse_scenario(&text, json, path)?;
    apply_overrides(&mut sc, global)?;
    sc.validate().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(sc)
}

fn apply_overrides(sc: &mut Scenario, global: &GlobalOpts) -> Result<(), CliError> {
    if let Some(n) = global.grid {
        sc.numerics.grid_n = n;
    }
    if let Some(t) = global.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Config(format!("--tol must be positive, got {t}")));
        }
        sc.numerics.tol = t;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Output helpers

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".qlpen-write-test");
    fs::write(&probe, b"").map_err(|e| CliError::Io(format!("{} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Format a float for CSV: shortest round-trip representation in
/// scientific notation.
fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Ok => "OK",
        Status::HypothesisFail => "HYPOTHESIS_FAIL",
        Status::Critical => "CRITICAL",
    }
}

fn status_exit(s: Status) -> i32 {
    match s {
        Status::Ok => exit::OK,
        Status::HypothesisFail => exit::HYPOTHESIS_FAIL,
        Status::Critical => exit::CRITICAL,
    }
}

/// Evaluates `f` over `items` on a pool of `workers` threads, preserving order.
#[cfg(feature = "parallel")]
fn run_rows<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| qlpen::par::map(items, f)))
}

/// Sequential build: the worker count is accepted but ignored.
#[cfg(not(feature = "parallel"))]
fn run_rows<T, R, F>(items: &[T], _workers: usize, f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    Ok(qlpen::par::map_seq(items, f))
}

/// Worker count: `QLPEN_THREADS` if set, else the available parallelism.
pub fn worker_count() -> Result<usize, CliError> {
    match std::env::var("QLPEN_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("QLPEN_THREADS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

// ---------------------------------------------------------------------------
// run

/// Pipeline part of a run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSection {
    pub extension: ExtensionSummary,
    pub corner: CornerConditionReport,
    pub schedule: Vec<ScheduleRow>,
    pub conformal_max_deviation: f64,
    pub chain: Vec<ChainLink>,
    pub chain_holds: bool,
    pub trace_points: usize,
    pub trace_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema: &'static str,
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub scenario: Scenario,
    /// `OK`, `HYPOTHESIS_FAIL`, `CRITICAL`, `CONFIG_ERROR` or `STAGE_FAILURE`.
    pub status: String,
    pub exit_code: i32,
    pub report: Option<InequalityReport>,
    pub pipeline: Option<PipelineSection>,
    pub error: Option<ErrorInfo>,
}

/// Evaluate one scenario; never fails (errors land in the summary).
pub fn run_scenario(sc: &Scenario, with_pipeline: bool) -> (RunSummary, Option<Vec<qlpen::extension::TracePoint>>) {
    let mut summary = RunSummary {
        schema: "qlpen.run",
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "run",
        scenario: sc.clone(),
        status: String::new(),
        exit_code: 0,
        report: None,
        pipeline: None,
        error: None,
    };
    let fail = |summary: &mut RunSummary, err: CliError| {
        summary.exit_code = err.exit_code();
        summary.status = match err {
            CliError::Stage { .. } => "STAGE_FAILURE".into(),
            _ => "CONFIG_ERROR".into(),
        };
        summary.error = Some(err.info());
    };
    let report = match evaluate_inequality(sc) {
        Ok(r) => r,
        Err(QlError::InteriorRejected(m)) => {
            // Data violating the energy condition is outside the theorem.
            summary.status = status_name(Status::HypothesisFail).into();
            summary.exit_code = exit::HYPOTHESIS_FAIL;
            summary.error = Some(ErrorInfo { kind: "interior_rejected".into(), stage: None, message: m });
            return (summary, None);
        }
        Err(e) => {
            fail(&mut summary, classify(e, "inequality"));
            return (summary, None);
        }
    };
    let mut status = report.status;
    summary.report = Some(report);
    let mut trace = None;
    if with_pipeline && status == Status::Ok {
        match pipeline_verify(sc) {
            Ok(p) => {
                status = p.report.status;
                let violations = trace_violations(&p.trace, sc.numerics.trace_slack).len();
                summary.pipeline = Some(PipelineSection {
                    extension: p.extension,
                    corner: p.corner,
                    schedule: p.schedule,
                    conformal_max_deviation: p.conformal_max_deviation,
                    chain: p.chain,
                    chain_holds: p.chain_holds,
                    trace_points: p.trace.len(),
                    trace_violations: violations,
                });
                summary.report = Some(p.report);
                trace = Some(p.trace);
            }
            Err(e) => {
                fail(&mut summary, classify(e, "pipeline"));
                return (summary, None);
            }
        }
    }
    summary.status = status_name(status).into();
    summary.exit_code = status_exit(status);
    (summary, trace)
}

fn checklist_rows(c: &Checklist) -> Vec<Vec<String>> {
    c.items
        .iter()
        .map(|i| {
            vec![
                i.name.clone(),
                num(i.margin),
                num(i.tol),
                i.strict.to_string(),
                i.advisory.to_string(),
                i.pass.to_string(),
                i.detail.clone(),
            ]
        })
        .collect()
}

/// Write `summary.json` and the CSV tables of a run into `dir`.
pub fn write_run_outputs(
    dir: &Path,
    summary: &RunSummary,
    trace: Option<&[qlpen::extension::TracePoint]>,
) -> Result<(), CliError> {
    ensure_dir(dir)?;
    write_json(&dir.join("summary.json"), summary)?;
    if let Some(rep) = &summary.report {
        write_csv(
            &dir.join("checklist.csv"),
            &["name", "margin", "tol", "strict", "advisory", "pass", "detail"],
            &checklist_rows(&rep.checklist),
        )?;
    }
    if let Some(p) = &summary.pipeline {
        let rows: Vec<Vec<String>> = p
            .chain
            .iter()
            .map(|l| vec![l.name.clone(), num(l.margin), num(l.tol), l.holds.to_string(), l.strict.to_string()])
            .collect();
        write_csv(&dir.join("chain.csv"), &["link", "margin", "tol", "holds", "strict"], &rows)?;
        let m_tol = summary.report.as_ref().and_then(|r| r.m_adm_pipeline_tol);
        let eps = summary.scenario.numerics.eps;
        let rows: Vec<Vec<String>> = p
            .schedule
            .iter()
            .map(|r| {
                vec![
                    num(r.delta_requested),
                    num(r.delta),
                    num(r.m_adm),
                    opt(m_tol),
                    num(r.max_deviation),
                    num(eps),
                    num(r.worst_margin),
                    num(r.worst_margin_eps_zero),
                    r.energy_pass.to_string(),
                    num(r.horizon_area_drift),
                    num(r.q_inf),
                    opt(r.q_drift),
                    opt(r.grad_l2),
                    r.divergence_sign_ok.to_string(),
                ]
            })
            .collect();
        write_csv(
            &dir.join("schedule.csv"),
            &[
                "delta_requested",
                "delta",
                "m_adm",
                "m_adm_tol",
                "max_deviation",
                "eps",
                "worst_margin",
                "worst_margin_eps_zero",
                "energy_pass",
                "horizon_area_drift",
                "q_inf",
                "q_drift",
                "grad_l2",
                "divergence_sign_ok",
            ],
            &rows,
        )?;
    }
    if let (Some(trace), Some(p)) = (trace, &summary.pipeline) {
        let tol = p.extension.trace_tol;
        let rows: Vec<Vec<String>> =
            trace.iter().map(|t| vec![num(t.s), num(t.value), num(tol), num(t.monitor)]).collect();
        write_csv(&dir.join("trace.csv"), &["s", "trace", "trace_tol", "monitor"], &rows)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

/// One axis `name=start:stop:count[:log]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl Axis {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::Config(format!("axis `{spec}`: {m} (expected name=start:stop:count[:log])"));
        let (name, range) = spec.split_once('=').ok_or_else(|| bad("missing `=`"))?;
        let name = name.trim();
        if !SWEEP_PARAMETERS.contains(&name) {
            return Err(bad(&format!("unknown parameter; choose from {}", SWEEP_PARAMETERS.join(", "))));
        }
        let parts: Vec<&str> = range.split(':').map(str::trim).collect();
        let log = match parts.len() {
            3 => false,
            4 if parts[3] == "log" => true,
            _ => return Err(bad("wrong number of fields")),
        };
        let f = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(&format!("`{s}` is not a finite number")));
        let (start, stop) = (f(parts[0])?, f(parts[1])?);
        let count: usize = parts[2].parse().map_err(|_| bad(&format!("`{}` is not a count", parts[2])))?;
        if count == 0 {
            return Err(bad("empty axis (count = 0)"));
        }
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(bad("log spacing needs positive end points"));
        }
        Ok(Self { name: name.to_string(), start, stop, count, log })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let t = i as f64 / last;
                if i + 1 == self.count {
                    self.stop
                } else if self.log {
                    let (a, b) = (self.start.log10(), self.stop.log10());
                    10f64.powf(a + (b - a) * t)
                } else {
                    self.start + (self.stop - self.start) * t
                }
            })
            .collect()
    }
}

/// Grid points in lexicographic axis order (first axis slowest).
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        let vals = axis.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub params: Vec<f64>,
    pub status: String,
    pub lhs: Option<f64>,
    pub lhs_tol: Option<f64>,
    pub rhs: Option<f64>,
    pub rhs_tol: Option<f64>,
    pub gap: Option<f64>,
    pub gap_tol: Option<f64>,
    /// Smallest margin over the non-advisory hypotheses, with its name.
    pub worst_margin: Option<f64>,
    pub worst_margin_tol: Option<f64>,
    pub worst_hypothesis: Option<String>,
    pub m_adm: Option<f64>,
    pub m_adm_tol: Option<f64>,
    pub chain_holds: Option<bool>,
    pub failures: Vec<String>,
    pub error: Option<ErrorInfo>,
    pub exit_code: i32,
}

/// First-order convergence fit of a single-axis `m_adm` column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub axis: String,
    /// Least-squares slope of `log|m_{k+1} − m_k|` against `log x_k`.
    pub observed_order: f64,
    /// `m_adm` at the last point plus the extrapolated remainder.
    pub extrapolated: f64,
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub schema: &'static str,
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub scenario: Scenario,
    pub axes: Vec<Axis>,
    pub pipeline: bool,
    pub rows: Vec<SweepRow>,
    pub counts: SweepCounts,
    pub convergence: Option<ConvergenceFit>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepCounts {
    pub ok: usize,
    pub hypothesis_fail: usize,
    pub critical: usize,
    pub errors: usize,
}

fn sweep_row(base: &Scenario, axes: &[Axis], index: usize, params: &[f64], pipeline: bool) -> SweepRow {
    let mut row = SweepRow {
        index,
        params: params.to_vec(),
        status: String::new(),
        lhs: None,
        lhs_tol: None,
        rhs: None,
        rhs_tol: None,
        gap: None,
        gap_tol: None,
        worst_margin: None,
        worst_margin_tol: None,
        worst_hypothesis: None,
        m_adm: None,
        m_adm_tol: None,
        chain_holds: None,
        failures: Vec::new(),
        error: None,
        exit_code: 0,
    };
    let mut sc = base.clone();
    sc.name = format!("{}[{index}]", base.name);
    for (axis, &v) in axes.iter().zip(params) {
        if let Err(e) = sc.set_param(&axis.name, v) {
            let err = classify(e, "sweep");
            row.status = "CONFIG_ERROR".into();
            row.exit_code = err.exit_code();
            row.error = Some(err.info());
            return row;
        }
    }
    let summary = match sc.validate() {
        Ok(()) => run_scenario(&sc, pipeline).0,
        Err(e) => {
            let err = classify(e, "sweep");
            row.status = "CONFIG_ERROR".into();
            row.exit_code = err.exit_code();
            row.error = Some(err.info());
            return row;
        }
    };
    row.status = summary.status;
    row.exit_code = summary.exit_code;
    row.error = summary.error;
    row.chain_holds = summary.pipeline.as_ref().map(|p| p.chain_holds);
    if let Some(r) = summary.report {
        row.lhs = Some(r.lhs);
        row.lhs_tol = Some(r.lhs_tol);
        row.rhs = Some(r.rhs);
        row.rhs_tol = Some(r.rhs_tol);
        row.gap = Some(r.gap);
        row.gap_tol = Some(r.gap_tol);
        row.m_adm = r.m_adm_pipeline;
        row.m_adm_tol = r.m_adm_pipeline_tol;
        if let Some(w) = r.checklist.items.iter().filter(|i| !i.advisory).min_by(|a, b| a.margin.total_cmp(&b.margin)) {
            row.worst_margin = Some(w.margin);
            row.worst_margin_tol = Some(w.tol);
            row.worst_hypothesis = Some(w.name.clone());
        }
        row.failures = r.checklist.failures().into_iter().map(String::from).collect();
    }
    row
}

fn convergence_fit(axes: &[Axis], rows: &[SweepRow]) -> Option<ConvergenceFit> {
    if axes.len() != 1 || rows.len() < 3 {
        return None;
    }
    let m: Vec<f64> = rows.iter().map(|r| r.m_adm).collect::<Option<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.params[0]).collect();
    let d: Vec<f64> = m.windows(2).map(|w| w[1] - w[0]).collect();
    let pts: Vec<(f64, f64)> = d
        .iter()
        .zip(&x)
        .filter(|(d, x)| d.abs() > 0.0 && **x > 0.0)
        .map(|(d, x)| (x.ln(), d.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let order = sxy / sxx;
    // Geometric remainder of a sequence converging at this order.
    let k = x.len();
    let ratio = (x[k - 1] / x[k - 2]).powf(order);
    let extrapolated = m[k - 1] + d[k - 2] * ratio / (1.0 - ratio);
    Some(ConvergenceFit { axis: axes[0].name.clone(), observed_order: order, extrapolated, differences: d })
}

/// Run a sweep on a bounded worker pool; rows come back in grid order.
pub fn sweep(base: &Scenario, axes: &[Axis], pipeline: bool, workers: usize) -> Result<SweepSummary, CliError> {
    if axes.is_empty() {
        return Err(CliError::Config("a sweep needs at least one --axis".into()));
    }
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.name == a.name) {
            return Err(CliError::Config(format!("axis `{}` given twice", a.name)));
        }
    }
    let points = grid_points(axes);
    let indexed: Vec<(usize, Vec<f64>)> = points.into_iter().enumerate().collect();
    let rows: Vec<SweepRow> = run_rows(&indexed, workers, |(i, p)| sweep_row(base, axes, *i, p, pipeline))?;
    let mut counts = SweepCounts::default();
    for r in &rows {
        match r.status.as_str() {
            "OK" => counts.ok += 1,
            "HYPOTHESIS_FAIL" => counts.hypothesis_fail += 1,
            "CRITICAL" => counts.critical += 1,
            _ => counts.errors += 1,
        }
    }
    let exit_code = if counts.critical > 0 {
        exit::CRITICAL
    } else if counts.errors > 0 {
        rows.iter().map(|r| r.exit_code).filter(|&c| c != exit::OK && c != exit::HYPOTHESIS_FAIL).max().unwrap_or(exit::STAGE)
    } else if counts.hypothesis_fail > 0 {
        exit::HYPOTHESIS_FAIL
    } else {
        exit::OK
    };
    let convergence = convergence_fit(axes, &rows);
    Ok(SweepSummary {
        schema: "qlpen.sweep",
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "sweep",
        scenario: base.clone(),
        axes: axes.to_vec(),
        pipeline,
        rows,
        counts,
        convergence,
        exit_code,
    })
}

/// Write `sweep.json` and `sweep.csv` into `dir`.
pub fn write_sweep_outputs(dir: &Path, summary: &SweepSummary) -> Result<(), CliError> {
    ensure_dir(dir)?;
    write_json(&dir.join("sweep.json"), summary)?;
    let mut header: Vec<String> = vec!["index".into()];
    header.extend(summary.axes.iter().map(|a| a.name.clone()));
    for h in [
        "status",
        "lhs",
        "lhs_tol",
        "rhs",
        "rhs_tol",
        "gap",
        "gap_tol",
        "worst_margin",
        "worst_margin_tol",
        "worst_hypothesis",
        "m_adm",
        "m_adm_tol",
        "chain_holds",
        "failures",
        "error",
    ] {
        header.push(h.into());
    }
    let rows: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![r.index.to_string()];
            v.extend(r.params.iter().map(|&p| num(p)));
            v.push(r.status.clone());
            for x in [r.lhs, r.lhs_tol, r.rhs, r.rhs_tol, r.gap, r.gap_tol, r.worst_margin, r.worst_margin_tol] {
                v.push(opt(x));
            }
            v.push(r.worst_hypothesis.clone().unwrap_or_default());
            v.push(opt(r.m_adm));
            v.push(opt(r.m_adm_tol));
            v.push(r.chain_holds.map(|b| b.to_string()).unwrap_or_default());
            v.push(r.failures.join(";"));
            v.push(r.error.as_ref().map(|e| e.message.clone()).unwrap_or_default());
            v
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&dir.join("sweep.csv"), &header, &rows)
}

// ---------------------------------------------------------------------------
// corner-demo

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerDemoRow {
    pub delta: f64,
    pub inner_zone_width: f64,
    /// `∫ R(g_δ)` over the inner zone and the exact jump `2(H₋ − H₊)`.
    pub curvature_integral: f64,
    pub curvature_expected: f64,
    pub curvature_rel_err: f64,
    /// `∫ ∇·E_δ` over the inner zone and the flux jump `Φ₊ − Φ₋`.
    pub divergence_integral: f64,
    pub divergence_expected: f64,
    pub divergence_rel_err: f64,
    pub grad_l2: Option<f64>,
    pub q_drift: Option<f64>,
    pub m_adm: Option<f64>,
    pub m_adm_tol: Option<f64>,
    pub horizon_area_drift: Option<f64>,
    pub worst_margin: Option<f64>,
    pub repair_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerDemoSummary {
    pub schema: &'static str,
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub inner: RNParams,
    pub outer: RNParams,
    pub radius: f64,
    pub variant: Variant,
    pub eps: f64,
    pub h_minus: f64,
    pub h_plus: f64,
    pub phi_minus: f64,
    pub phi_plus: f64,
    pub corner: CornerConditionReport,
    pub rows: Vec<CornerDemoRow>,
}

fn rel_err(x: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        x.abs()
    } else {
        (x - expected).abs() / expected.abs()
    }
}

pub fn corner_demo(args: &CornerDemoArgs) -> Result<CornerDemoSummary, CliError> {
    let p = |m: f64, q: f64| RNParams::new(m, q).map_err(|e| classify(e, "corner"));
    let (inner, outer) = (p(args.inner_mass, args.inner_charge)?, p(args.outer_mass, args.outer_charge)?);
    if args.deltas.is_empty() || args.deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(CliError::Config("--deltas must be a non-empty list of positive numbers".into()));
    }
    let corner =
        ChargedCornerData::rn_glue(&inner, &outer, args.radius, args.r_max).map_err(|e| classify(e, "corner"))?;
    let cond = check_corner_conditions(&corner, args.variant);
    let rows = qlpen::par::map(&args.deltas, |&delta| -> Result<CornerDemoRow, CliError> {
        let data = smooth_corner(&corner, delta).map_err(|e| classify(e, "smooth"))?;
        let z = data.inner_zone_integrals();
        let r_exp = 2.0 * (data.h_minus - data.h_plus);
        let d_exp = data.phi_plus - data.phi_minus;
        let mut row = CornerDemoRow {
            delta,
            inner_zone_width: z.width,
            curvature_integral: z.scalar_curvature,
            curvature_expected: r_exp,
            curvature_rel_err: rel_err(z.scalar_curvature, r_exp),
            divergence_integral: z.divergence,
            divergence_expected: d_exp,
            divergence_rel_err: rel_err(z.divergence, d_exp),
            grad_l2: None,
            q_drift: None,
            m_adm: None,
            m_adm_tol: None,
            horizon_area_drift: None,
            worst_margin: None,
            repair_error: None,
        };
        if args.variant != Variant::A {
            if let Ok(dr) = divergence_repair(&data) {
                row.grad_l2 = Some(dr.grad_l2);
                row.q_drift = Some(dr.q_drift);
            }
        }
        if cond.pass {
            match conformal_repair(&data, args.variant, args.eps) {
                Ok(c) => {
                    row.m_adm = Some(c.m_adm);
                    row.m_adm_tol = Some(c.m_adm_tol);
                    row.horizon_area_drift = Some(c.horizon_area_drift);
                    row.worst_margin = Some(c.worst_margin);
                }
                Err(e) => row.repair_error = Some(e.to_string()),
            }
        }
        Ok(row)
    });
    Ok(CornerDemoSummary {
        schema: "qlpen.corner_demo",
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "corner-demo",
        inner,
        outer,
        radius: args.radius,
        variant: args.variant,
        eps: args.eps,
        h_minus: corner.h_minus,
        h_plus: corner.h_plus,
        phi_minus: corner.phi_minus,
        phi_plus: corner.phi_plus,
        corner: cond,
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}

pub fn write_corner_outputs(dir: &Path, s: &CornerDemoSummary) -> Result<(), CliError> {
    ensure_dir(dir)?;
    write_json(&dir.join("corner.json"), s)?;
    let rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.delta),
                num(r.inner_zone_width),
                num(r.curvature_integral),
                num(r.curvature_expected),
                num(r.curvature_rel_err),
                num(r.divergence_integral),
                num(r.divergence_expected),
                num(r.divergence_rel_err),
                opt(r.grad_l2),
                opt(r.q_drift),
                opt(r.m_adm),
                opt(r.m_adm_tol),
                opt(r.horizon_area_drift),
                opt(r.worst_margin),
                r.repair_error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("corner.csv"),
        &[
            "delta",
            "inner_zone_width",
            "curvature_integral",
            "curvature_expected",
            "curvature_rel_err",
            "divergence_integral",
            "divergence_expected",
            "divergence_rel_err",
            "grad_l2",
            "q_drift",
            "m_adm",
            "m_adm_tol",
            "horizon_area_drift",
            "worst_margin",
            "repair_error",
        ],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// extension-trace

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub s: f64,
    pub areal_radius: f64,
    pub u: f64,
    pub u_closed_form: f64,
    pub trace: f64,
    pub monitor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionTraceSummary {
    pub schema: &'static str,
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub reference: RNParams,
    pub r0: f64,
    pub u0: f64,
    pub grid_n: usize,
    pub leaves: usize,
    pub areal_radius_max: f64,
    pub m_adm: f64,
    /// `m̄ + (1 − u₀⁻²) r₀ V̄²(r₀)/2`.
    pub m_adm_closed_form: f64,
    pub trace_end: f64,
    /// `|trace(s_max) − (m_adm − m̄)|`.
    pub limit_gap: f64,
    pub trace_slack: f64,
    pub monotonicity_violations: usize,
    pub warp_closed_form_error: f64,
    pub identity_residual: f64,
    pub tail_exponent: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<TraceRow>,
}

pub fn extension_trace(args: &ExtensionTraceArgs, grid_n: usize, slack: f64) -> Result<ExtensionTraceSummary, CliError> {
    let p = RNParams::new(args.mbar, args.qbar).map_err(|e| classify(e, "extension"))?;
    if !(args.u0 > 0.0 && args.areal_factor > 1.0 && args.step_ratio > 0.0) {
        return Err(CliError::Config("need u0 > 0, areal_factor > 1 and step_ratio > 0".into()));
    }
    let start = round_sphere_n(&p, args.r0, grid_n).map_err(|e| classify(e, "extension"))?;
    let flow = FlowOptions::to_areal_factor(&start, args.step_ratio, args.areal_factor);
    let u0 = vec![args.u0; grid_n + 1];
    let (_, ext) = build_extension(&start, &u0, &flow, &WarpOptions::default()).map_err(|e| classify(e, "extension"))?;
    let trace = monotone_mass_trace(&ext);
    let violations = trace_violations(&trace, slack).len();
    let mut rows = Vec::with_capacity(trace.len());
    let mut warp_err = 0.0f64;
    for (k, t) in trace.iter().enumerate() {
        let r = ext.areal_radius[k];
        let closed = spherical_warp_closed_form(&p, args.r0, args.u0, r);
        let u_mean = ext.u[k].iter().sum::<f64>() / ext.u[k].len() as f64;
        warp_err = ext.u[k].iter().fold(warp_err, |m, u| m.max((u - closed).abs()));
        rows.push(TraceRow { s: t.s, areal_radius: r, u: u_mean, u_closed_form: closed, trace: t.value, monitor: t.monitor });
    }
    let trace_end = trace.last().map_or(f64::NAN, |t| t.value);
    Ok(ExtensionTraceSummary {
        schema: "qlpen.extension_trace",
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "extension-trace",
        reference: p,
        r0: args.r0,
        u0: args.u0,
        grid_n,
        leaves: trace.len(),
        areal_radius_max: ext.areal_radius.last().copied().unwrap_or(args.r0),
        m_adm: ext.m_adm,
        m_adm_closed_form: p.mbar + 0.5 * (1.0 - args.u0.powi(-2)) * args.r0 * p.potential_sq(args.r0),
        trace_end,
        limit_gap: (trace_end - (ext.m_adm - p.mbar)).abs(),
        trace_slack: slack,
        monotonicity_violations: violations,
        warp_closed_form_error: warp_err,
        identity_residual: ext.identity_residual,
        tail_exponent: ext.tail_exponent,
        rows,
    })
}

pub fn write_trace_outputs(dir: &Path, s: &ExtensionTraceSummary) -> Result<(), CliError> {
    ensure_dir(dir)?;
    write_json(&dir.join("extension.json"), s)?;
    let rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.s),
                num(r.areal_radius),
                num(r.u),
                num(r.u_closed_form),
                num((r.u - r.u_closed_form).abs()),
                num(r.trace),
                num(s.trace_slack),
                num(r.monitor),
            ]
        })
        .collect();
    write_csv(
        &dir.join("trace.csv"),
        &["s", "areal_radius", "u", "u_closed_form", "u_err", "trace", "trace_tol", "monitor"],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// Entry point

/// Execute a parsed command line and return the process exit code. Messages
/// go to stdout (one status line) and stderr (errors).
pub fn execute(cli: &Cli) -> i32 {
    match execute_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qlpen: {e}");
            e.exit_code()
        }
    }
}

fn execute_inner(cli: &Cli) -> Result<i32, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Run { scenario, no_pipeline } => {
            let sc = load_scenario(scenario, g)?;
            let (summary, trace) = run_scenario(&sc, !no_pipeline);
            write_run_outputs(&g.out, &summary, trace.as_deref())?;
            match (&summary.report, &summary.error) {
                (Some(r), _) => println!(
                    "{}: {} lhs={:e} rhs={:e} gap={:e} (tol {:e})",
                    sc.name, summary.status, r.lhs, r.rhs, r.gap, r.gap_tol
                ),
                (None, _) => println!("{}: {}", sc.name, summary.status),
            }
            if let Some(e) = &summary.error {
                match &e.stage {
                    Some(stage) => eprintln!("qlpen: [stage {stage}] {}", e.message),
                    None => eprintln!("qlpen: {}", e.message),
                }
            }
            Ok(summary.exit_code)
        }
        Command::Sweep { scenario, axes, pipeline } => {
            let sc = load_scenario(scenario, g)?;
            let axes: Vec<Axis> = axes.iter().map(|a| Axis::parse(a)).collect::<Result<_, _>>()?;
            let workers = worker_count()?;
            let summary = sweep(&sc, &axes, *pipeline, workers)?;
            write_sweep_outputs(&g.out, &summary)?;
            let c = &summary.counts;
            println!(
                "{}: {} rows, {} OK, {} HYPOTHESIS_FAIL, {} CRITICAL, {} errors",
                sc.name,
                summary.rows.len(),
                c.ok,
                c.hypothesis_fail,
                c.critical,
                c.errors
            );
            if let Some(f) = &summary.convergence {
                println!("{}: m_adm observed order {:.2}, extrapolated {:e}", f.axis, f.observed_order, f.extrapolated);
            }
            Ok(summary.exit_code)
        }
        Command::CornerDemo(args) => {
            let s = corner_demo(args)?;
            write_corner_outputs(&g.out, &s)?;
            for r in &s.rows {
                println!(
                    "delta={:e}: ∫R = {:e} (jump {:e}), ∫div E = {:e} (jump {:e})",
                    r.delta, r.curvature_integral, r.curvature_expected, r.divergence_integral, r.divergence_expected
                );
            }
            Ok(if s.corner.pass { exit::OK } else { exit::HYPOTHESIS_FAIL })
        }
        Command::ExtensionTrace(args) => {
            let grid = g.grid.unwrap_or(16);
            if grid < 4 || grid % 2 != 0 {
                return Err(CliError::Config(format!("--grid must be even and >= 4, got {grid}")));
            }
            let s = extension_trace(args, grid, g.tol.unwrap_or(1e-8))?;
            write_trace_outputs(&g.out, &s)?;
            println!(
                "m_adm = {:e} (closed form {:e}), |trace(s_max) - (m_adm - mbar)| = {:e}, violations = {}",
                s.m_adm, s.m_adm_closed_form, s.limit_gap, s.monotonicity_violations
            );
            Ok(if s.monotonicity_violations == 0 { exit::OK } else { exit::CRITICAL })
        }
    }
}
