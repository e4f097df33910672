//! Command-line runner: wires objectives, condition families, estimators,
//! conjugate probes and gradient-descent experiments into reproducible
//! report files.
//!
//! # Commands
//!
//! | command | what it does |
//! |---------|--------------|
//! | `certify` | runs the condition families selected by the supplied constants |
//! | `estimate` | estimates `L`, `mu`, `nu` empirically (with refinement) |
//! | `gd` | runs gradient descent, verifies per-step descent and rates |
//! | `conjugate` | probes the numeric conjugate against its contracts |
//! | `suite` | estimates, then runs every applicable family plus the GD phase |
//!
//! # Function catalog grammar
//!
//! `--function` takes `kind ':' parameters` with comma-separated reals:
//!
//! ```text
//! phi0:<d>                                       |x|^2 / 2 on R^d
//! quadratic:diag:<c1,...,cd>[:b:<b1,...,bd>]     x'Cx/2 - b'x, C = diag(c)
//! least_squares:diag:<a1,...,ad>[:b:<b1,...,bd>] |Ax-b|^2 / 2, A = diag(a)
//! quartic1d                                      x^4 on R
//! negative_phi0:<d>                              -|x|^2 / 2 on R^d
//! ```
//!
//! # Files
//!
//! Every command writes `report.json` into `--out`. `certify` and `suite`
//! additionally write `conditions.csv` with header
//! `condition,constant,n_checks,n_skipped,pass,worst_margin,witness_x,witness_y,lambda`
//! (`pass` is `true`, `false`, `error` or `skipped`; vectors are
//! `;`-joined components). `gd` and `suite` write `trace.csv` with header
//! `iter,value,grad_norm,gap_ratio`. Wall-clock metadata lives only in
//! `report.json`; the CSV bodies are byte-reproducible from the config.
//!
//! # Exit codes
//!
//! `0` — every claim holds. `1` — at least one claim violation or error
//! row. `2` — usage error (unknown flag, malformed function spec, bad
//! combination). A *claim* is a row whose constants were all supplied by
//! the user (or that needs no constants, like the convexity family);
//! rows evaluated at estimated constants are informational and do not
//! affect the exit code.
//!
//! # Config file
//!
//! `--config FILE` reads defaults from a JSON object with the same names
//! as the flags (`function`, `L`, `mu`, `nu`, `fbar`, `seed`, `pairs`,
//! `box`, `step`, `t`, `iters`, `x0`, `out`); explicit flags override
//! file values. Unknown keys are rejected.

use crate::certify::{
    self, check_family, estimate_l, estimate_mu, estimate_pl, CertReport, ConditionId,
    ConstantEstimate, Constants, Family,
};
use crate::conjugate::{conjugate_numeric, inverse_gradient, ConjugateSolverParams};
use crate::error::{Error, Result};
use crate::gd::{
    self, compare_rates, gd_run, verify_descent_inequalities, verify_rate, DescentReport,
    GdConfig, GdTrace, RatePair, RateReport,
};
use crate::linalg::{sample_points, SampleCloud, Vector};
use crate::objectives::{from_spec, Objective};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

const DEFAULT_SEED: u64 = 7;
const DEFAULT_PAIRS: usize = 2000;
const DEFAULT_ITERS: usize = 500;
const DEFAULT_BOX: (f64, f64) = (-2.0, 2.0);
const DEFAULT_OUT: &str = "convexcert-out";
const GD_GRAD_STOP: f64 = 1e-12;

/// Safety inflation applied to an *estimated* smoothness constant before it
/// drives a step size: the estimator is lower-biased, and stepping at the
/// reciprocal of an underestimate breaks the descent guarantee by design.
const ESTIMATED_L_SAFETY: f64 = 1.05;

/// Below this fraction of the smoothness constant, an estimated
/// strong-convexity constant marks the objective as effectively not
/// strongly convex; reciprocal-form conditions become inapplicable.
const MU_APPLICABLE_FRACTION: f64 = 1e-6;

/// Contract thresholds for the conjugate probe.
const FENCHEL_RESIDUAL_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-6;
const NUMERIC_VS_ANALYTIC_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Certify,
    Estimate,
    Gd,
    Conjugate,
    Suite,
}

/// Fully resolved run configuration (flags merged over the config file,
/// defaults applied, inputs validated).
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub function_spec: String,
    pub l: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub f_bar: Option<f64>,
    pub seed: u64,
    pub pairs: usize,
    pub box_low: f64,
    pub box_high: f64,
    pub step: Option<f64>,
    pub iters: usize,
    pub x0: Option<Vec<f64>>,
    pub out_dir: PathBuf,
}

#[derive(Parser)]
#[command(
    name = "convexcert",
    version,
    about = "Certifies smoothness / strong convexity / gradient dominance on catalog objectives and verifies gradient-descent rates"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Check condition families at user-supplied constants.
    Certify(CommonArgs),
    /// Estimate the constants empirically.
    Estimate(CommonArgs),
    /// Run gradient descent and verify descent inequalities.
    Gd(CommonArgs),
    /// Probe the numeric conjugate against its contracts.
    Conjugate(CommonArgs),
    /// Full pipeline: estimate, certify everything applicable, run GD,
    /// verify both rate factors.
    Suite(CommonArgs),
}

#[derive(Args, Default)]
struct CommonArgs {
    /// Catalog function spec, e.g. quadratic:diag:1,4
    #[arg(long)]
    function: Option<String>,
    /// Smoothness constant L.
    #[arg(long = "L", allow_negative_numbers = true)]
    l: Option<f64>,
    /// Strong-convexity constant mu.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Gradient-dominance constant nu.
    #[arg(long, allow_negative_numbers = true)]
    nu: Option<f64>,
    /// Optimal value f_bar used by the gradient-dominance checks.
    #[arg(long, allow_negative_numbers = true)]
    fbar: Option<f64>,
    /// Sampling seed (default 7).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sampled pairs (default 2000).
    #[arg(long)]
    pairs: Option<usize>,
    /// Sampling box LO:HI applied to every coordinate (default -2:2).
    #[arg(long = "box", allow_hyphen_values = true)]
    box_spec: Option<String>,
    /// Gradient-descent step size.
    #[arg(long)]
    step: Option<f64>,
    /// Model curvature t; equivalent to step 1/t.
    #[arg(long)]
    t: Option<f64>,
    /// Gradient-descent iteration budget (default 500).
    #[arg(long)]
    iters: Option<usize>,
    /// Start point as comma-separated reals (default: seeded draw).
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Output directory (default convexcert-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file supplying defaults for the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Flag-shaped JSON config file.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    function: Option<String>,
    #[serde(rename = "L")]
    l: Option<f64>,
    mu: Option<f64>,
    nu: Option<f64>,
    fbar: Option<f64>,
    seed: Option<u64>,
    pairs: Option<usize>,
    #[serde(rename = "box")]
    box_spec: Option<String>,
    step: Option<f64>,
    t: Option<f64>,
    iters: Option<usize>,
    x0: Option<String>,
    out: Option<PathBuf>,
}

pub enum ParsedArgs {
    Run(Box<ExperimentConfig>),
    Help(String),
}

/// Parses an argument list (without the program name), merging in the
/// optional `--config` file. Flags override file values; anything
/// malformed is a usage error.
pub fn parse_config(args: &[String]) -> Result<ParsedArgs> {
    let mut argv = Vec::with_capacity(args.len() + 1);
    argv.push("convexcert".to_string());
    argv.extend(args.iter().cloned());
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(ParsedArgs::Help(e.to_string()));
        }
        Err(e) => return Err(Error::Usage(e.to_string())),
    };
    let (command, mut a) = match cli.command {
        CliCommand::Certify(a) => (CommandKind::Certify, a),
        CliCommand::Estimate(a) => (CommandKind::Estimate, a),
        CliCommand::Gd(a) => (CommandKind::Gd, a),
        CliCommand::Conjugate(a) => (CommandKind::Conjugate, a),
        CliCommand::Suite(a) => (CommandKind::Suite, a),
    };

    if let Some(path) = a.config.clone() {
        let file = load_file_config(&path)?;
        a.function = a.function.or(file.function);
        a.l = a.l.or(file.l);
        a.mu = a.mu.or(file.mu);
        a.nu = a.nu.or(file.nu);
        a.fbar = a.fbar.or(file.fbar);
        a.seed = a.seed.or(file.seed);
        a.pairs = a.pairs.or(file.pairs);
        a.box_spec = a.box_spec.or(file.box_spec);
        a.step = a.step.or(file.step);
        a.t = a.t.or(file.t);
        a.iters = a.iters.or(file.iters);
        a.x0 = a.x0.or(file.x0);
        a.out = a.out.or(file.out);
    }

    let function_spec = a
        .function
        .ok_or_else(|| Error::Usage("--function is required".into()))?;
    // Validate the spec now so grammar failures exit as usage errors.
    let objective = from_spec(&function_spec)?;

    let (box_low, box_high) = match &a.box_spec {
        None => DEFAULT_BOX,
        Some(s) => parse_box(s)?,
    };
    let step = match (a.step, a.t) {
        (Some(_), Some(_)) => {
            return Err(Error::Usage("--step and --t are mutually exclusive".into()));
        }
        (Some(s), None) if s > 0.0 => Some(s),
        (None, Some(t)) if t > 0.0 => Some(1.0 / t),
        (None, None) => None,
        _ => return Err(Error::Usage("--step and --t must be positive".into())),
    };
    let x0 = match &a.x0 {
        None => None,
        Some(s) => {
            let components = parse_reals(s)?;
            if components.len() != objective.dim() {
                return Err(Error::Usage(format!(
                    "--x0 has dimension {}, function `{}` has dimension {}",
                    components.len(),
                    function_spec,
                    objective.dim()
                )));
            }
            Some(components)
        }
    };
    let pairs = a.pairs.unwrap_or(DEFAULT_PAIRS);
    if pairs == 0 {
        return Err(Error::Usage("--pairs must be positive".into()));
    }
    let iters = a.iters.unwrap_or(DEFAULT_ITERS);
    if iters == 0 {
        return Err(Error::Usage("--iters must be positive".into()));
    }
    for (name, value) in [("--L", a.l), ("--mu", a.mu), ("--nu", a.nu)] {
        if let Some(v) = value {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Usage(format!("{name} must be a nonnegative real")));
            }
        }
    }

    Ok(ParsedArgs::Run(Box::new(ExperimentConfig {
        command,
        function_spec,
        l: a.l,
        mu: a.mu,
        nu: a.nu,
        f_bar: a.fbar,
        seed: a.seed.unwrap_or(DEFAULT_SEED),
        pairs,
        box_low,
        box_high,
        step,
        iters,
        x0,
        out_dir: a.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    })))
}

fn load_file_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Usage(format!("malformed config {}: {e}", path.display())))
}

fn parse_box(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(Error::Usage(format!("--box expects LO:HI, got `{s}`")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Usage(format!("bad box bound `{}`", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Usage(format!("bad box bound `{}`", parts[1])))?;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::Usage(format!("--box needs LO < HI, got `{s}`")));
    }
    Ok((lo, hi))
}

fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad real `{t}` in `{s}`")))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Report model
// ---------------------------------------------------------------------------

/// Where a constant used by a check came from. Only `Supplied` and
/// `Metadata` constants back claims; the rest are informational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Supplied,
    Metadata,
    Estimated,
    Presolve,
    Unavailable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Pass,
    Fail,
    Error,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionRow {
    pub family: &'static str,
    pub condition: String,
    pub constants: String,
    pub status: RowStatus,
    pub informational: bool,
    pub n_checks: usize,
    pub n_skipped: usize,
    pub worst_margin: Option<f64>,
    pub witness_x: Option<Vector>,
    pub witness_y: Option<Vector>,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub error: Option<String>,
}

impl ConditionRow {
    fn from_report(family: Family, report: &CertReport, informational: bool) -> ConditionRow {
        let status = if report.n_checks == 0 {
            RowStatus::Skipped
        } else if report.pass {
            RowStatus::Pass
        } else {
            RowStatus::Fail
        };
        ConditionRow {
            family: family.as_str(),
            condition: report.condition.to_string(),
            constants: report.constants.label(),
            status,
            informational,
            n_checks: report.n_checks,
            n_skipped: report.n_skipped,
            worst_margin: (report.n_checks > 0).then_some(report.worst_margin),
            witness_x: report.witness.as_ref().map(|w| w.x.clone()),
            witness_y: report.witness.as_ref().map(|w| w.y.clone()),
            lambda: report.witness.as_ref().and_then(|w| w.lambda),
            seed: report.seed,
            error: None,
        }
    }

    fn from_error(
        family: Family,
        condition: ConditionId,
        constants: &Constants,
        seed: u64,
        error: &Error,
        informational: bool,
    ) -> ConditionRow {
        ConditionRow {
            family: family.as_str(),
            condition: condition.to_string(),
            constants: constants.label(),
            status: RowStatus::Error,
            informational,
            n_checks: 0,
            n_skipped: 0,
            worst_margin: None,
            witness_x: None,
            witness_y: None,
            lambda: None,
            seed,
            error: Some(error.to_string()),
        }
    }

    fn skipped(
        family: Family,
        condition: ConditionId,
        constants: &Constants,
        seed: u64,
        reason: &str,
    ) -> ConditionRow {
        ConditionRow {
            family: family.as_str(),
            condition: condition.to_string(),
            constants: constants.label(),
            status: RowStatus::Skipped,
            informational: true,
            n_checks: 0,
            n_skipped: 0,
            worst_margin: None,
            witness_x: None,
            witness_y: None,
            lambda: None,
            seed,
            error: Some(reason.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateRow {
    pub name: &'static str,
    pub estimate: ConstantEstimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantInUse {
    pub name: &'static str,
    pub value: f64,
    pub source: Source,
}

#[derive(Clone, Debug, Serialize)]
pub struct GdSection {
    pub l_used: f64,
    pub l_source: Source,
    pub step: f64,
    pub x0: Vector,
    pub steps_taken: usize,
    pub final_value: f64,
    pub final_grad_norm: f64,
    pub f_bar: Option<f64>,
    pub f_bar_source: Source,
    pub informational: bool,
    pub descent: Option<DescentReport>,
    pub rates: Option<RatePair>,
    pub rate_standard: Option<RateReport>,
    pub rate_improved: Option<RateReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugateSection {
    pub n_points: usize,
    pub max_fenchel_residual: f64,
    pub fenchel_pass: bool,
    pub max_round_trip_error: f64,
    pub round_trip_pass: bool,
    pub max_numeric_vs_analytic: Option<f64>,
    pub analytic_pass: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionInfo {
    pub name: String,
    pub dim: usize,
    pub is_convex: bool,
    pub l_true: Option<f64>,
    pub mu_true: Option<f64>,
    pub pl_true: Option<f64>,
    pub f_star: Option<f64>,
    pub conjugate_well_posed: bool,
}

impl FunctionInfo {
    fn new(f: &Objective) -> Self {
        let meta = f.meta();
        FunctionInfo {
            name: f.name().to_string(),
            dim: f.dim(),
            is_convex: meta.is_convex,
            l_true: meta.l_true,
            mu_true: meta.mu_true,
            pl_true: meta.pl_true,
            f_star: meta.f_star,
            conjugate_well_posed: meta.conjugate_well_posed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub violations: usize,
    pub informational_failures: usize,
    pub errors: usize,
    pub skipped: usize,
    pub exit_code: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

/// The structured report every command writes as `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub tool: ToolInfo,
    /// Wall-clock metadata only; everything else is seed-reproducible.
    pub generated_at_unix: u64,
    pub config: ExperimentConfig,
    pub function: FunctionInfo,
    pub constants_in_use: Vec<ConstantInUse>,
    pub estimates: Vec<EstimateRow>,
    pub conditions: Vec<ConditionRow>,
    pub gd: Option<GdSection>,
    pub conjugate: Option<ConjugateSection>,
    pub summary: Summary,
}

pub struct RunOutcome {
    pub exit_code: i32,
    pub report: SuiteReport,
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

struct RunState {
    objective: Objective,
    cloud: SampleCloud,
    rows: Vec<ConditionRow>,
    estimates: Vec<EstimateRow>,
    constants_in_use: Vec<ConstantInUse>,
    gd: Option<GdSection>,
    conjugate: Option<ConjugateSection>,
    trace: Option<GdTrace>,
}

/// Executes a parsed configuration and writes its report files.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let objective = from_spec(&cfg.function_spec)?;
    let cloud = SampleCloud::with_box(
        objective.dim(),
        cfg.box_low,
        cfg.box_high,
        cfg.pairs,
        cfg.seed,
    )
    .map_err(|e| Error::Usage(e.to_string()))?;
    let mut state = RunState {
        objective,
        cloud,
        rows: Vec::new(),
        estimates: Vec::new(),
        constants_in_use: Vec::new(),
        gd: None,
        conjugate: None,
        trace: None,
    };

    match cfg.command {
        CommandKind::Certify => run_certify(cfg, &mut state)?,
        CommandKind::Estimate => run_estimate(cfg, &mut state)?,
        CommandKind::Gd => run_gd_command(cfg, &mut state)?,
        CommandKind::Conjugate => run_conjugate(cfg, &mut state)?,
        CommandKind::Suite => run_suite(cfg, &mut state)?,
    }

    let summary = summarize(&state);
    let report = SuiteReport {
        tool: ToolInfo {
            name: "convexcert",
            version: env!("CARGO_PKG_VERSION"),
        },
        generated_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: cfg.clone(),
        function: FunctionInfo::new(&state.objective),
        constants_in_use: state.constants_in_use,
        estimates: state.estimates,
        conditions: state.rows,
        gd: state.gd,
        conjugate: state.conjugate,
        summary: summary.clone(),
    };

    write_outputs(cfg, &report, state.trace.as_ref())?;
    Ok(RunOutcome {
        exit_code: summary.exit_code,
        report,
    })
}

fn summarize(state: &RunState) -> Summary {
    let mut violations = 0;
    let mut informational_failures = 0;
    let mut errors = 0;
    let mut skipped = 0;
    for row in &state.rows {
        match row.status {
            RowStatus::Fail if row.informational => informational_failures += 1,
            RowStatus::Fail => violations += 1,
            RowStatus::Error => errors += 1,
            RowStatus::Skipped => skipped += 1,
            RowStatus::Pass => {}
        }
    }
    if let Some(gd) = &state.gd {
        if gd.error.is_some() {
            errors += 1;
        }
        let mut gd_failures = 0;
        if let Some(d) = &gd.descent {
            if !d.step1.pass || d.step3.map(|s| !s.pass).unwrap_or(false) {
                gd_failures += 1;
            }
        }
        for rate in [&gd.rate_standard, &gd.rate_improved].into_iter().flatten() {
            if !rate.pass {
                gd_failures += 1;
            }
        }
        if gd_failures > 0 {
            if gd.informational {
                informational_failures += gd_failures;
            } else {
                violations += gd_failures;
            }
        }
    }
    if let Some(conj) = &state.conjugate {
        if conj.error.is_some() {
            errors += 1;
        }
        for pass in [
            Some(conj.fenchel_pass),
            Some(conj.round_trip_pass),
            conj.analytic_pass,
        ]
        .into_iter()
        .flatten()
        {
            if !pass {
                violations += 1;
            }
        }
    }
    let exit_code = if violations > 0 || errors > 0 { 1 } else { 0 };
    Summary {
        violations,
        informational_failures,
        errors,
        skipped,
        exit_code,
    }
}

fn resolve_f_bar(cfg: &ExperimentConfig, f: &Objective) -> (Option<f64>, Source) {
    if let Some(fb) = cfg.f_bar {
        (Some(fb), Source::Supplied)
    } else if let Some(fb) = f.meta().f_star {
        (Some(fb), Source::Metadata)
    } else {
        (None, Source::Unavailable)
    }
}

fn push_family(
    state: &mut RunState,
    family: Family,
    constants: &Constants,
    informational: bool,
    skip_reciprocal_mu: bool,
) {
    let skip_reason = "inapplicable: estimated mu is at zero";
    for (cond, outcome) in check_family(&state.objective, family, constants, &state.cloud, None) {
        if skip_reciprocal_mu
            && matches!(cond.as_str(), "PSC1" | "PSC2" | "DSC1" | "DSC2" | "DSC3")
        {
            state.rows.push(ConditionRow::skipped(
                family,
                cond,
                constants,
                state.cloud.seed(),
                skip_reason,
            ));
            continue;
        }
        match outcome {
            Ok(report) => state
                .rows
                .push(ConditionRow::from_report(family, &report, informational)),
            Err(e) => state.rows.push(ConditionRow::from_error(
                family,
                cond,
                constants,
                state.cloud.seed(),
                &e,
                informational,
            )),
        }
    }
}

fn push_pl_row(state: &mut RunState, nu: f64, f_bar: f64, informational: bool) {
    let constants = Constants::with_pl(nu, f_bar);
    match certify::check_condition(
        &state.objective,
        ConditionId::Pl,
        &constants,
        &state.cloud,
        None,
    ) {
        Ok(report) => {
            state
                .rows
                .push(ConditionRow::from_report(Family::Convex, &report, informational));
            // PL is not a convexity condition; correct the family label.
            state.rows.last_mut().unwrap().family = "PL";
        }
        Err(e) => {
            state.rows.push(ConditionRow::from_error(
                Family::Convex,
                ConditionId::Pl,
                &constants,
                state.cloud.seed(),
                &e,
                informational,
            ));
            state.rows.last_mut().unwrap().family = "PL";
        }
    }
}

fn run_certify(cfg: &ExperimentConfig, state: &mut RunState) -> Result<()> {
    push_family(state, Family::Convex, &Constants::default(), false, false);
    if let Some(l) = cfg.l {
        state.constants_in_use.push(ConstantInUse {
            name: "L",
            value: l,
            source: Source::Supplied,
        });
        push_family(state, Family::Smooth, &Constants::with_l(l), false, false);
    }
    if let Some(mu) = cfg.mu {
        state.constants_in_use.push(ConstantInUse {
            name: "mu",
            value: mu,
            source: Source::Supplied,
        });
        push_family(state, Family::Strong, &Constants::with_mu(mu), false, false);
    }
    if let (Some(l), Some(mu)) = (cfg.l, cfg.mu) {
        push_family(
            state,
            Family::Joint,
            &Constants::with_l_mu(l, mu),
            false,
            false,
        );
    }
    if let Some(nu) = cfg.nu {
        let (f_bar, source) = resolve_f_bar(cfg, &state.objective);
        let Some(f_bar) = f_bar else {
            return Err(Error::Usage(
                "--nu needs --fbar or a catalog optimal value".into(),
            ));
        };
        state.constants_in_use.push(ConstantInUse {
            name: "f_bar",
            value: f_bar,
            source,
        });
        push_pl_row(state, nu, f_bar, false);
    }
    Ok(())
}

fn run_estimate(cfg: &ExperimentConfig, state: &mut RunState) -> Result<()> {
    let f = state.objective.clone();
    state.estimates.push(EstimateRow {
        name: "L",
        estimate: estimate_l(&f, &state.cloud, true)?,
    });
    state.estimates.push(EstimateRow {
        name: "mu",
        estimate: estimate_mu(&f, &state.cloud, true)?,
    });
    let (f_bar, _) = resolve_f_bar(cfg, &f);
    if let Some(f_bar) = f_bar {
        state.estimates.push(EstimateRow {
            name: "nu",
            estimate: estimate_pl(&f, f_bar, &state.cloud, true)?,
        });
    }
    Ok(())
}

/// Shared GD phase for the `gd` and `suite` commands.
fn run_gd_phase(
    cfg: &ExperimentConfig,
    state: &mut RunState,
    l_used: f64,
    l_source: Source,
    nu: Option<(f64, Source)>,
) -> Result<()> {
    let f = state.objective.clone();
    let step = cfg.step.unwrap_or(1.0 / l_used);
    let x0 = match &cfg.x0 {
        Some(components) => Vector::new(components.clone())?,
        None => sample_points(&state.cloud, 1).remove(0),
    };
    let (f_bar, mut f_bar_source) = resolve_f_bar(cfg, &f);
    let f_bar = match f_bar {
        Some(fb) => Some(fb),
        None => {
            // High-precision pre-solve; its result is an estimated optimum.
            let pre = GdConfig {
                step: 1.0 / l_used,
                max_iters: 100_000,
                grad_stop: 1e-13,
                record_trace: false,
            };
            match gd_run(&f, &x0, &pre, None) {
                Ok(trace) => {
                    f_bar_source = Source::Presolve;
                    Some(trace.final_value())
                }
                Err(_) => None,
            }
        }
    };

    let gd_cfg = GdConfig {
        step,
        max_iters: cfg.iters,
        grad_stop: GD_GRAD_STOP,
        record_trace: true,
    };
    let informational = l_source == Source::Estimated
        || nu.map(|(_, s)| s == Source::Estimated).unwrap_or(false)
        || f_bar_source == Source::Presolve;

    let mut section = GdSection {
        l_used,
        l_source,
        step,
        x0: x0.clone(),
        steps_taken: 0,
        final_value: f64::NAN,
        final_grad_norm: f64::NAN,
        f_bar,
        f_bar_source,
        informational,
        descent: None,
        rates: None,
        rate_standard: None,
        rate_improved: None,
        error: None,
    };

    let trace = match gd_run(&f, &x0, &gd_cfg, f_bar) {
        Ok(trace) => trace,
        Err(Error::Divergence {
            iteration,
            value,
            partial,
        }) => {
            section.error = Some(format!(
                "divergence at iteration {iteration} (value {value:e})"
            ));
            section.steps_taken = partial.steps_taken();
            section.final_value = partial.final_value();
            section.final_grad_norm = *partial.grad_norms.last().unwrap_or(&f64::NAN);
            state.trace = Some(*partial);
            state.gd = Some(section);
            return Ok(());
        }
        Err(e) => return Err(e),
    };

    section.steps_taken = trace.steps_taken();
    section.final_value = trace.final_value();
    section.final_grad_norm = *trace.grad_norms.last().unwrap();

    if (step * l_used - 1.0).abs() <= 1e-12 && trace.steps_taken() > 0 {
        section.descent = Some(verify_descent_inequalities(&f, l_used, &trace)?);
    }
    if let (Some((nu_val, _)), Some(_)) = (nu, f_bar) {
        let nu_capped = nu_val.min(l_used);
        if nu_capped > 0.0 {
            let rates = compare_rates(l_used, nu_capped)?;
            section.rates = Some(rates);
            if trace.gap_ratios.iter().flatten().next().is_some() {
                section.rate_standard = Some(verify_rate(&trace, rates.standard)?);
                section.rate_improved = Some(verify_rate(&trace, rates.improved)?);
            }
        }
    }
    state.trace = Some(trace);
    state.gd = Some(section);
    Ok(())
}

fn run_gd_command(cfg: &ExperimentConfig, state: &mut RunState) -> Result<()> {
    let f = state.objective.clone();
    let (l_used, l_source) = match cfg.l {
        Some(l) if l > 0.0 => (l, Source::Supplied),
        Some(_) => return Err(Error::Usage("--L must be positive for gd".into())),
        None => {
            let est = estimate_l(&f, &state.cloud, true)?;
            let inflated = est.value * ESTIMATED_L_SAFETY;
            state.estimates.push(EstimateRow {
                name: "L",
                estimate: est,
            });
            (inflated, Source::Estimated)
        }
    };
    state.constants_in_use.push(ConstantInUse {
        name: "L",
        value: l_used,
        source: l_source,
    });
    let nu = cfg.nu.map(|n| (n, Source::Supplied));
    run_gd_phase(cfg, state, l_used, l_source, nu)
}

fn run_conjugate(cfg: &ExperimentConfig, state: &mut RunState) -> Result<()> {
    let f = state.objective.clone();
    let params = ConjugateSolverParams::default();
    let n_points = cfg.pairs;
    let points = sample_points(&state.cloud, n_points);

    let mut section = ConjugateSection {
        n_points,
        max_fenchel_residual: 0.0,
        fenchel_pass: false,
        max_round_trip_error: 0.0,
        round_trip_pass: false,
        max_numeric_vs_analytic: None,
        analytic_pass: None,
        error: None,
    };

    let probe = (|| -> Result<()> {
        let mut max_fenchel = 0.0f64;
        let mut max_round_trip = 0.0f64;
        let mut max_analytic: Option<f64> = None;
        for x in &points {
            let r = crate::conjugate::fenchel_identity_residual(&f, x, &params)?;
            max_fenchel = max_fenchel.max(r);

            let x_back = inverse_gradient(&f, x, &params)?;
            let err = f.gradient_checked(&x_back)?.sub(x).norm();
            max_round_trip = max_round_trip.max(err);

            if let Some(analytic) = &f.meta().analytic_conjugate {
                let numeric = conjugate_numeric(&f, x, &params)?.value;
                let gap = (numeric - analytic(x)).abs();
                max_analytic = Some(max_analytic.unwrap_or(0.0).max(gap));
            }
        }
        section.max_fenchel_residual = max_fenchel;
        section.fenchel_pass = max_fenchel <= FENCHEL_RESIDUAL_TOL;
        section.max_round_trip_error = max_round_trip;
        section.round_trip_pass = max_round_trip <= ROUND_TRIP_TOL;
        section.max_numeric_vs_analytic = max_analytic;
        section.analytic_pass = max_analytic.map(|g| g <= NUMERIC_VS_ANALYTIC_TOL);
        Ok(())
    })();
    if let Err(e) = probe {
        section.error = Some(e.to_string());
        // The error is counted once; unevaluated checks are not failures.
        section.fenchel_pass = true;
        section.round_trip_pass = true;
    }
    state.conjugate = Some(section);
    Ok(())
}

fn run_suite(cfg: &ExperimentConfig, state: &mut RunState) -> Result<()> {
    let f = state.objective.clone();

    // Constants: supplied values win, estimates fill the gaps.
    let l_est = estimate_l(&f, &state.cloud, true)?;
    let mu_est = estimate_mu(&f, &state.cloud, true)?;
    let (l_used, l_source) = match cfg.l {
        Some(l) => (l, Source::Supplied),
        None => (l_est.value, Source::Estimated),
    };
    let (mu_used, mu_source) = match cfg.mu {
        Some(mu) => (mu, Source::Supplied),
        None => (mu_est.value, Source::Estimated),
    };
    state.estimates.push(EstimateRow {
        name: "L",
        estimate: l_est,
    });
    state.estimates.push(EstimateRow {
        name: "mu",
        estimate: mu_est,
    });

    let (f_bar, f_bar_source) = resolve_f_bar(cfg, &f);
    let nu = match cfg.nu {
        Some(nu) => Some((nu, Source::Supplied)),
        None => match f_bar {
            Some(fb) => {
                let est = estimate_pl(&f, fb, &state.cloud, true)?;
                let value = est.value;
                state.estimates.push(EstimateRow {
                    name: "nu",
                    estimate: est,
                });
                Some((value, Source::Estimated))
            }
            None => None,
        },
    };

    state.constants_in_use.push(ConstantInUse {
        name: "L",
        value: l_used,
        source: l_source,
    });
    state.constants_in_use.push(ConstantInUse {
        name: "mu",
        value: mu_used,
        source: mu_source,
    });
    if let Some((nu_val, source)) = nu {
        state.constants_in_use.push(ConstantInUse {
            name: "nu",
            value: nu_val,
            source,
        });
    }
    if let Some(fb) = f_bar {
        state.constants_in_use.push(ConstantInUse {
            name: "f_bar",
            value: fb,
            source: f_bar_source,
        });
    }

    // Condition families.
    push_family(state, Family::Convex, &Constants::default(), false, false);
    push_family(
        state,
        Family::Smooth,
        &Constants::with_l(l_used),
        l_source == Source::Estimated,
        false,
    );
    let mu_inapplicable =
        mu_source == Source::Estimated && mu_used <= MU_APPLICABLE_FRACTION * l_used.max(1.0);
    push_family(
        state,
        Family::Strong,
        &Constants::with_mu(mu_used),
        mu_source == Source::Estimated || mu_inapplicable,
        mu_inapplicable,
    );
    let joint_constants = Constants::with_l_mu(l_used, mu_used);
    if l_used > mu_used + 1e-12 && mu_used > MU_APPLICABLE_FRACTION * l_used.max(1.0) {
        push_family(
            state,
            Family::Joint,
            &joint_constants,
            l_source == Source::Estimated || mu_source == Source::Estimated,
            false,
        );
    } else {
        for cond in Family::Joint.members() {
            state.rows.push(ConditionRow::skipped(
                Family::Joint,
                *cond,
                &joint_constants,
                state.cloud.seed(),
                "inapplicable: needs mu > 0 and L > mu",
            ));
        }
    }
    if let (Some((nu_val, nu_source)), Some(fb)) = (nu, f_bar) {
        push_pl_row(
            state,
            nu_val,
            fb,
            nu_source == Source::Estimated || f_bar_source == Source::Presolve,
        );
    }

    // GD phase at step 1/L, with a safety factor on estimated constants.
    let (l_run, l_run_source) = match l_source {
        Source::Supplied => (l_used, Source::Supplied),
        _ => (l_used * ESTIMATED_L_SAFETY, Source::Estimated),
    };
    run_gd_phase(cfg, state, l_run, l_run_source, nu)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// File output
// ---------------------------------------------------------------------------

fn format_vector(v: &Option<Vector>) -> String {
    match v {
        None => String::new(),
        Some(v) => v
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(";"),
    }
}

fn write_outputs(
    cfg: &ExperimentConfig,
    report: &SuiteReport,
    trace: Option<&GdTrace>,
) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;

    let json =
        serde_json::to_string_pretty(report).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(cfg.out_dir.join("report.json"), json + "\n")?;

    if matches!(cfg.command, CommandKind::Certify | CommandKind::Suite) {
        let file = fs::File::create(cfg.out_dir.join("conditions.csv"))?;
        write_conditions_csv(&report.conditions, file)?;
    }
    if matches!(cfg.command, CommandKind::Gd | CommandKind::Suite) {
        if let Some(trace) = trace {
            let file = fs::File::create(cfg.out_dir.join("trace.csv"))?;
            gd::write_trace_csv(trace, file)?;
        }
    }
    Ok(())
}

fn write_conditions_csv<W: std::io::Write>(rows: &[ConditionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "condition",
        "constant",
        "n_checks",
        "n_skipped",
        "pass",
        "worst_margin",
        "witness_x",
        "witness_y",
        "lambda",
    ])
    .map_err(csv_io)?;
    for row in rows {
        let pass = match row.status {
            RowStatus::Pass => "true",
            RowStatus::Fail => "false",
            RowStatus::Error => "error",
            RowStatus::Skipped => "skipped",
        };
        w.write_record([
            row.condition.clone(),
            row.constants.clone(),
            row.n_checks.to_string(),
            row.n_skipped.to_string(),
            pass.to_string(),
            row.worst_margin.map(|m| m.to_string()).unwrap_or_default(),
            format_vector(&row.witness_x),
            format_vector(&row.witness_y),
            row.lambda.map(|l| l.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One-line human rendering of each row, for terminal output.
pub fn print_summary(report: &SuiteReport) {
    for est in &report.estimates {
        println!(
            "estimate {:>3}: {:.6} ({:?}, {} samples{})",
            est.name,
            est.estimate.value,
            est.estimate.bias,
            est.estimate.n_samples,
            if est.estimate.refined { ", refined" } else { "" },
        );
    }
    for row in &report.conditions {
        let status = match row.status {
            RowStatus::Pass => "pass",
            RowStatus::Fail => "FAIL",
            RowStatus::Error => "ERROR",
            RowStatus::Skipped => "skip",
        };
        let margin = row
            .worst_margin
            .map(|m| format!(" worst_margin={m:.3e}"))
            .unwrap_or_default();
        let info = if row.informational { " [info]" } else { "" };
        let err = row
            .error
            .as_ref()
            .map(|e| format!(" ({e})"))
            .unwrap_or_default();
        println!(
            "{:>7} {:<6} [{}]{}{}{}",
            row.condition, status, row.constants, margin, info, err
        );
    }
    if let Some(gd) = &report.gd {
        println!(
            "gd: step={} steps={} final_value={:.6e} final_grad={:.3e}{}",
            gd.step,
            gd.steps_taken,
            gd.final_value,
            gd.final_grad_norm,
            if gd.informational { " [info]" } else { "" }
        );
        if let Some(d) = &gd.descent {
            println!(
                "  descent: smoothness-step {} (worst {:.3e}){}",
                if d.step1.pass { "pass" } else { "FAIL" },
                d.step1.worst_margin,
                d.step3
                    .map(|s| format!(
                        ", convex-step {} (worst {:.3e})",
                        if s.pass { "pass" } else { "FAIL" },
                        s.worst_margin
                    ))
                    .unwrap_or_default()
            );
        }
        if let (Some(r), Some(std), Some(imp)) = (&gd.rates, &gd.rate_standard, &gd.rate_improved)
        {
            println!(
                "  rates: standard {:.6} {} / improved {:.6} {} (worst ratio {:.6})",
                r.standard,
                if std.pass { "pass" } else { "FAIL" },
                r.improved,
                if imp.pass { "pass" } else { "FAIL" },
                imp.worst_ratio,
            );
        }
        if let Some(e) = &gd.error {
            println!("  ERROR: {e}");
        }
    }
    if let Some(c) = &report.conjugate {
        println!(
            "conjugate: fenchel {:.3e} {} / round-trip {:.3e} {}{}",
            c.max_fenchel_residual,
            if c.fenchel_pass { "pass" } else { "FAIL" },
            c.max_round_trip_error,
            if c.round_trip_pass { "pass" } else { "FAIL" },
            c.max_numeric_vs_analytic
                .map(|g| format!(
                    " / vs-analytic {:.3e} {}",
                    g,
                    if c.analytic_pass.unwrap_or(false) {
                        "pass"
                    } else {
                        "FAIL"
                    }
                ))
                .unwrap_or_default()
        );
        if let Some(e) = &c.error {
            println!("  ERROR: {e}");
        }
    }
    let s = &report.summary;
    println!(
        "verdict: {} violations, {} informational failures, {} errors, {} skipped -> exit {}",
        s.violations, s.informational_failures, s.errors, s.skipped, s.exit_code
    );
}
