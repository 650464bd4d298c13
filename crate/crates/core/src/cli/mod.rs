//! Command-line front end.
//!
//! `enumerate`, `weights`, `solve`, `verify` and `reproduce` share one JSON
//! configuration format (see [`config::RunConfig`]). Indices on the command
//! line, in configurations and in every report are 1-based.

pub mod config;
pub mod output;
pub mod reproduce;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::analysis::{
    brute_force_a_optimal, check_unbiasedness, min_norm_least_squares, oa_strength_check,
    variance_sum, DesignMatrix, UnbiasednessReport, VarianceReport, ORACLE_TIE_TOL,
};
use crate::design::{evaluate_term, CandidateSet, ModelMatrix, ModelSpec};
use crate::error::DesignError;
use crate::solver::{solve, Formulation, GroupLassoProblem, Solution, Status};
use crate::weights::{algorithm1_weights, scale_weights, zero_fixed_points, TieBreak, WeightTrace};
use config::{KappaConfig, LambdaConfig, Mode, Resolved, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
}

/// A failure carrying the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: exit::CONFIG,
            message: message.into(),
        }
    }

    /// Maps a library error, naming parameters by their 1-based index and label.
    fn from_design(e: DesignError, spec: Option<&ModelSpec>) -> Self {
        let name = |t: usize| match spec {
            Some(s) => format!("{} ({})", t + 1, s.terms()[t].label(s.factors())),
            None => (t + 1).to_string(),
        };
        match e {
            DesignError::Infeasible { target, residual } => CliError {
                code: exit::INFEASIBLE,
                message: format!(
                    "parameter {} cannot be estimated without bias (residual {residual:.3e})",
                    name(target)
                ),
            },
            DesignError::Biased { target, residual } => CliError {
                code: exit::INFEASIBLE,
                message: format!(
                    "estimator of parameter {} is biased (residual {residual:.3e})",
                    name(target)
                ),
            },
            other => CliError::config(other.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::from_design(e, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "oadesigner",
    version,
    about = "Sparse A-optimal experimental designs via group lasso"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the candidate design points (CSV by default)
    Enumerate(Common),
    /// Compute the per-candidate penalty weights (JSON)
    Weights(Common),
    /// Select a design by solving the group-lasso problem
    Solve(Common),
    /// Check a design CSV: estimators, bias, variances, strength, optimality
    Verify {
        #[command(flatten)]
        common: Common,
        /// Design CSV with one row per factor (term rows are checked for consistency)
        #[arg(long)]
        design: PathBuf,
    },
    /// Run a built-in example end to end and check the expected result
    Reproduce {
        /// Example number
        #[arg(value_parser = clap::value_parser!(u8).range(4..=6))]
        example: u8,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Print the built-in configuration instead of running it
        #[arg(long)]
        print_config: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Write the result here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// One value for every target, or one per target, comma separated
    #[arg(long, value_delimiter = ',')]
    kappa: Option<Vec<f64>>,
    /// File of penalty weights, replacing the configured ones
    #[arg(long)]
    lambda_file: Option<PathBuf>,
    #[arg(long)]
    lambda_scale: Option<f64>,
    /// Candidates (1-based) whose weight is forced to zero, comma separated
    #[arg(long, value_delimiter = ',')]
    fix_points: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    /// Loads the configuration and applies command-line overrides.
    fn load(&self) -> Result<(RunConfig, PathBuf), CliError> {
        let (mut config, base) = config::load(&self.config)?;
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        if let Some(k) = &self.kappa {
            config.kappa = Some(match k.as_slice() {
                [one] => KappaConfig::Uniform(*one),
                many => KappaConfig::PerTarget(many.to_vec()),
            });
        }
        if let Some(path) = &self.lambda_file {
            let cwd = std::env::current_dir().map_err(|e| CliError::config(e.to_string()))?;
            config.lambda = LambdaConfig::Text(cwd.join(path).to_string_lossy().into_owned());
        }
        if let Some(scale) = self.lambda_scale {
            config.lambda_scale = scale;
        }
        if let Some(points) = &self.fix_points {
            config.fixed_points = points.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok((config, base))
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::config(format!("cannot write to standard output: {e}")))
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Enumerate(common) => {
            let (config, _) = common.load()?;
            let resolved = config::resolve(&config)?;
            let text = match common.format.unwrap_or(Format::Csv) {
                Format::Csv => candidates_csv(&resolved),
                Format::Json => output::to_json(&CandidatesReport::new(&resolved)),
            };
            emit(common.output.as_deref(), &text)?;
            Ok(exit::OK)
        }
        Command::Weights(common) => {
            let (config, base) = common.load()?;
            let resolved = config::resolve(&config)?;
            let weights = compute_weights(&config, &base, &resolved)?;
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => output::to_json(&weights.report),
                Format::Csv => output::to_csv(
                    "candidate",
                    &(1..=weights.lambdas.len()).collect::<Vec<_>>(),
                    &["lambda".to_string()],
                    &DMatrix::from_row_slice(1, weights.lambdas.len(), &weights.lambdas),
                ),
            };
            emit(common.output.as_deref(), &text)?;
            Ok(exit::OK)
        }
        Command::Solve(common) => {
            let (config, base) = common.load()?;
            let resolved = config::resolve(&config)?;
            let outcome = run_solve(&config, &base, &resolved)?;
            let json = output::to_json(&outcome.report);
            let csv = outcome.design_csv();
            let (primary, companion, companion_ext) = match common.format.unwrap_or(Format::Json) {
                Format::Json => (&json, &csv, "csv"),
                Format::Csv => (&csv, &json, "json"),
            };
            emit(common.output.as_deref(), primary)?;
            // a file output also gets the other artifact next to it
            if let Some(path) = &common.output {
                let other = path.with_extension(companion_ext);
                if &other != path {
                    emit(Some(&other), companion)?;
                }
            }
            Ok(match outcome.solution.status {
                Status::Converged => exit::OK,
                Status::MaxIterations => {
                    eprintln!("warning: the solver stopped at its iteration limit");
                    exit::NOT_CONVERGED
                }
            })
        }
        Command::Verify { common, design } => {
            let (config, _) = common.load()?;
            let resolved = config::resolve(&config)?;
            let text = std::fs::read_to_string(&design)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", design.display())))?;
            let table = output::parse_csv(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", design.display())))?;
            let report = verify_design(&resolved, &table)?;
            let text = match common.format.unwrap_or(Format::Json) {
                Format::Json => output::to_json(&report),
                Format::Csv => report.estimators_csv(),
            };
            emit(common.output.as_deref(), &text)?;
            if !report.feasible {
                eprintln!(
                    "error: {}",
                    report
                        .infeasibility
                        .as_deref()
                        .unwrap_or("design is infeasible")
                );
                return Ok(exit::INFEASIBLE);
            }
            Ok(exit::OK)
        }
        Command::Reproduce {
            example,
            output,
            format,
            print_config,
        } => {
            let config = reproduce::builtin(example).expect("example range checked by the parser");
            if print_config {
                emit(output.as_deref(), &output::to_json(&config))?;
                return Ok(exit::OK);
            }
            let report = reproduce::reproduce(example)?;
            let text = match format {
                Some(Format::Json) => output::to_json(&report),
                _ => report.to_text(),
            };
            emit(output.as_deref(), &text)?;
            Ok(if report.passed {
                exit::OK
            } else {
                reproduce::FAILED
            })
        }
    }
}

#[derive(Debug, Serialize)]
struct CandidatesReport {
    factors: Vec<String>,
    candidates: Vec<Vec<f64>>,
}

impl CandidatesReport {
    fn new(r: &Resolved) -> Self {
        CandidatesReport {
            factors: r
                .spec
                .factors()
                .iter()
                .map(|f| f.name().to_string())
                .collect(),
            candidates: r
                .candidates
                .points()
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        }
    }
}

fn candidates_csv(r: &Resolved) -> String {
    let labels: Vec<String> = r
        .spec
        .factors()
        .iter()
        .map(|f| f.name().to_string())
        .collect();
    output::to_csv(
        "candidate",
        &(1..=r.candidates.len()).collect::<Vec<_>>(),
        &labels,
        r.candidates.points(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightsReport {
    /// `auto` when computed by the greedy construction, `explicit` otherwise.
    pub source: String,
    pub tie_break: String,
    pub lambda_scale: f64,
    pub fixed_points: Vec<usize>,
    pub lambdas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection_order: Option<Vec<usize>>,
    /// One row per candidate, one column per step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Weights {
    pub lambdas: Vec<f64>,
    pub trace: Option<WeightTrace>,
    pub report: WeightsReport,
}

/// Weights per the configuration: computed or read, then scaled and zeroed at fixed points.
pub fn compute_weights(
    config: &RunConfig,
    base: &Path,
    resolved: &Resolved,
) -> Result<Weights, CliError> {
    let g_count = resolved.candidates.len();
    let fixed = config::one_based(&config.fixed_points, g_count, "fixed point")?;
    let tie = config.tie_break();
    let (mut lambdas, trace) = match &config.lambda {
        LambdaConfig::Text(s) if s == "auto" => {
            let trace = scale_weights(
                &algorithm1_weights(&resolved.model, tie)?,
                config.lambda_scale,
            )?;
            (trace.lambdas.clone(), Some(trace))
        }
        explicit => {
            let list = match explicit {
                LambdaConfig::List(l) => l.clone(),
                LambdaConfig::Text(path) => config::read_lambda_file(&base.join(path))?,
            };
            if list.len() != g_count {
                return Err(CliError::config(format!(
                    "{} weights given for {g_count} candidates",
                    list.len()
                )));
            }
            if let Some(x) = list.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(CliError::config(format!(
                    "weight {x} is not a finite non-negative number"
                )));
            }
            if !(config.lambda_scale > 0.0 && config.lambda_scale.is_finite()) {
                return Err(CliError::config(format!(
                    "weight scale must be positive, got {}",
                    config.lambda_scale
                )));
            }
            (list.iter().map(|x| x * config.lambda_scale).collect(), None)
        }
    };
    zero_fixed_points(&mut lambdas, &fixed)?;
    let report = WeightsReport {
        source: if trace.is_some() { "auto" } else { "explicit" }.into(),
        tie_break: match tie {
            TieBreak::SmallestIndex => "smallest-index".into(),
            TieBreak::SeededRandom(seed) => format!("seeded-random:{seed}"),
        },
        lambda_scale: config.lambda_scale,
        fixed_points: fixed.iter().map(|g| g + 1).collect(),
        lambdas: lambdas.clone(),
        selection_order: trace
            .as_ref()
            .map(|t| t.selection_order.iter().map(|g| g + 1).collect()),
        l_matrix: trace.as_ref().map(|t| output::rows(&t.l_matrix)),
    };
    Ok(Weights {
        lambdas,
        trace,
        report,
    })
}

/// Design rows as printed: every factor, then the remaining non-intercept terms.
pub fn design_rows(spec: &ModelSpec, points: &DMatrix<f64>) -> (Vec<String>, DMatrix<f64>) {
    let mut labels: Vec<String> = spec
        .factors()
        .iter()
        .map(|f| f.name().to_string())
        .collect();
    let mut rows: Vec<Vec<f64>> = points
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let runs: Vec<Vec<f64>> = points
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    for term in spec
        .terms()
        .iter()
        .filter(|t| !t.is_intercept() && t.main_effect().is_none())
    {
        labels.push(term.label(spec.factors()));
        rows.push(runs.iter().map(|p| evaluate_term(p, term)).collect());
    }
    let values = DMatrix::from_fn(rows.len(), points.ncols(), |r, n| rows[r][n]);
    (labels, values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetInfo {
    pub index: usize,
    pub label: String,
}

fn target_info(spec: &ModelSpec) -> Vec<TargetInfo> {
    spec.targets()
        .iter()
        .map(|&t| TargetInfo {
            index: t + 1,
            label: spec.terms()[t].label(spec.factors()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    /// Candidate index of every run.
    pub runs: Vec<usize>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub active_residual: f64,
    pub inactive_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: String,
    pub mode: Mode,
    pub iterations: usize,
    pub objective: f64,
    pub constraint_residual: f64,
    pub certificate: CertificateReport,
    pub targets: Vec<TargetInfo>,
    pub support: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub group_norms: Vec<f64>,
    /// One row per target, one column per candidate.
    pub coefficients: Vec<Vec<f64>>,
    pub variances: VarianceReport,
    pub design: DesignReport,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Solution,
    pub design: DesignMatrix,
    pub report: SolveReport,
}

impl SolveOutcome {
    pub fn design_csv(&self) -> String {
        let d = &self.report.design;
        let values = DMatrix::from_fn(d.rows.len(), d.runs.len(), |r, n| d.rows[r][n]);
        output::to_csv(
            "run",
            &(1..=d.runs.len()).collect::<Vec<_>>(),
            &d.labels,
            &values,
        )
    }
}

fn kappas(config: &RunConfig, targets: usize) -> Result<Vec<f64>, CliError> {
    match &config.kappa {
        None => Err(CliError::config("relaxed mode needs kappa")),
        Some(KappaConfig::Uniform(k)) => Ok(vec![*k; targets]),
        Some(KappaConfig::PerTarget(list)) if list.len() == targets => Ok(list.clone()),
        Some(KappaConfig::PerTarget(list)) => Err(CliError::config(format!(
            "{} kappa values for {targets} targets",
            list.len()
        ))),
    }
}

/// Weights, solve and report for one configuration.
pub fn run_solve(
    config: &RunConfig,
    base: &Path,
    resolved: &Resolved,
) -> Result<SolveOutcome, CliError> {
    let spec = &resolved.spec;
    let weights = compute_weights(config, base, resolved)?;
    let formulation = match config.mode {
        Mode::Constrained => Formulation::Constrained,
        Mode::Relaxed => Formulation::Relaxed {
            kappas: kappas(config, spec.targets().len())?,
        },
    };
    let problem = GroupLassoProblem::new(
        resolved.model.clone(),
        spec.targets().to_vec(),
        weights.lambdas.clone(),
        formulation,
        config.solver.clone(),
    )?;
    let solution = solve(&problem).map_err(|e| CliError::from_design(e, Some(spec)))?;
    let design = DesignMatrix::from_coefficients(
        &resolved.candidates,
        &solution.coefficients,
        &solution.support,
    )?;
    let (labels, rows) = design_rows(spec, &design.points);
    let report = SolveReport {
        status: match solution.status {
            Status::Converged => "converged",
            Status::MaxIterations => "max-iterations",
        }
        .into(),
        mode: config.mode,
        iterations: solution.iterations,
        objective: solution.objective,
        constraint_residual: solution.constraint_residual,
        certificate: CertificateReport {
            active_residual: solution.certificate.active_residual,
            inactive_excess: solution.certificate.inactive_excess,
        },
        targets: target_info(spec),
        support: solution.support.iter().map(|g| g + 1).collect(),
        lambdas: weights.lambdas,
        group_norms: solution.group_norms.clone(),
        coefficients: output::rows(&solution.coefficients),
        variances: variance_sum(&design.estimators, 1.0)?,
        design: DesignReport {
            runs: design.source_indices.iter().map(|g| g + 1).collect(),
            labels,
            rows: output::rows(&rows),
        },
    };
    Ok(SolveOutcome {
        solution,
        design,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrengthReport {
    pub strength: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub optimal_value: Option<f64>,
    pub optimal_supports: Vec<Vec<usize>>,
    pub evaluated_count: u64,
    pub feasible_count: u64,
    /// Whether the design's variance sum attains the optimum.
    pub design_is_a_optimal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub runs: Vec<usize>,
    pub targets: Vec<TargetInfo>,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasibility: Option<String>,
    /// Least-squares estimators, one row per target, one column per run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unbiasedness: Option<UnbiasednessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variances: Option<VarianceReport>,
    pub oa_strength: StrengthReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_skipped: Option<String>,
}

impl VerifyReport {
    fn estimators_csv(&self) -> String {
        let labels: Vec<String> = self.targets.iter().map(|t| t.label.clone()).collect();
        let rows = self.estimators.clone().unwrap_or_default();
        let values = DMatrix::from_fn(rows.len(), self.runs.len(), |r, n| rows[r][n]);
        output::to_csv(
            "run",
            &(1..=self.runs.len()).collect::<Vec<_>>(),
            &labels,
            &values,
        )
    }
}

/// Maps the factor rows of a design table to candidate indices.
fn runs_of(resolved: &Resolved, table: &output::Table) -> Result<Vec<usize>, CliError> {
    let spec = &resolved.spec;
    let factors = spec.factors();
    let mut factor_rows = Vec::with_capacity(factors.len());
    for f in factors {
        let row = table
            .labels
            .iter()
            .position(|l| l == f.name())
            .ok_or_else(|| {
                CliError::config(format!("design has no row for factor {}", f.name()))
            })?;
        factor_rows.push(row);
    }
    let n = table.values.ncols();
    let points = DMatrix::from_fn(factors.len(), n, |f, c| table.values[(factor_rows[f], c)]);
    // any other row must be a model term and agree with the factor rows
    let (labels, expected) = design_rows(spec, &points);
    for (r, label) in table.labels.iter().enumerate() {
        if factor_rows.contains(&r) {
            continue;
        }
        let k = labels.iter().position(|l| l == label).ok_or_else(|| {
            CliError::config(format!(
                "design row '{label}' is neither a factor nor a model term"
            ))
        })?;
        if let Some(c) = (0..n).find(|&c| table.values[(r, c)] != expected[(k, c)]) {
            return Err(CliError::config(format!(
                "design row '{label}' disagrees with the factor rows in run {}",
                c + 1
            )));
        }
    }
    (0..n)
        .map(|c| {
            let p: Vec<f64> = points.column(c).iter().copied().collect();
            resolved.candidates.position(&p).ok_or_else(|| {
                CliError::config(format!("run {} {:?} is not a candidate point", c + 1, p))
            })
        })
        .collect()
}

/// Least-squares estimators, bias, variances, strength and oracle comparison for a design.
pub fn verify_design(resolved: &Resolved, table: &output::Table) -> Result<VerifyReport, CliError> {
    let spec = &resolved.spec;
    let runs = runs_of(resolved, table)?;
    let n = runs.len();
    let run_model = ModelMatrix::from_matrix(resolved.model.select_columns(&runs))?;
    let everything: Vec<usize> = (0..n).collect();

    let levels: Vec<Vec<f64>> = spec.factors().iter().map(|f| f.levels().to_vec()).collect();
    let strength = spec.factors().len().min(2);
    let oa_strength = StrengthReport {
        strength,
        passed: oa_strength_check(&resolved.candidates.select(&runs), &levels, strength)?,
    };

    let (feasible, infeasibility, estimators, unbiasedness, variances) =
        match min_norm_least_squares(&run_model, &everything, spec.targets()) {
            Ok(b) => {
                let unbiased = check_unbiasedness(
                    &run_model,
                    spec.targets(),
                    &b,
                    crate::analysis::FEASIBILITY_TOL,
                )?;
                let v = variance_sum(&b, 1.0)?;
                (true, None, Some(output::rows(&b)), Some(unbiased), Some(v))
            }
            Err(e @ DesignError::Infeasible { .. }) => (
                false,
                Some(CliError::from_design(e, Some(spec)).message),
                None,
                None,
                None,
            ),
            Err(e) => return Err(e.into()),
        };

    let (oracle, oracle_skipped) = match brute_force_a_optimal(&resolved.model, spec.targets(), n) {
        Ok(r) => {
            let design_is_a_optimal = match (&variances, r.optimal_value) {
                (Some(v), Some(best)) => {
                    Some(v.total <= best + ORACLE_TIE_TOL * best.abs().max(1.0))
                }
                _ => None,
            };
            (
                Some(OracleReport {
                    optimal_value: r.optimal_value,
                    optimal_supports: r
                        .optimal_supports
                        .iter()
                        .map(|s| s.iter().map(|g| g + 1).collect())
                        .collect(),
                    evaluated_count: r.evaluated_count,
                    feasible_count: r.feasible_count,
                    design_is_a_optimal,
                }),
                None,
            )
        }
        Err(e @ DesignError::SizeGuard { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };

    Ok(VerifyReport {
        runs: runs.iter().map(|g| g + 1).collect(),
        targets: target_info(spec),
        feasible,
        infeasibility,
        estimators,
        unbiasedness,
        variances,
        oa_strength,
        oracle,
        oracle_skipped,
    })
}

/// Design table of `candidates` at `runs`, for tests and tools.
pub fn design_table(spec: &ModelSpec, candidates: &CandidateSet, runs: &[usize]) -> output::Table {
    let (labels, values) = design_rows(spec, &candidates.select(runs));
    output::Table { labels, values }
}
