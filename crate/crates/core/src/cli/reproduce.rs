//! Built-in example configurations and their end-to-end checks.

use std::path::Path;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::Serialize;

use super::config::{self, LambdaConfig, Mode, RunConfig, TermConfig, TieBreakPolicy};
use super::{run_solve, CliError, SolveReport};
use crate::analysis::{
    check_unbiasedness, design_equivalent, min_norm_least_squares, oa_strength_check, term_rows,
    variance_sum, FEASIBILITY_TOL,
};
use crate::design::{enumerate_full_factorial, two_level_factors, ModelSpec};

/// Exit code of a run whose checks did not all pass.
pub const FAILED: u8 = 1;

const VARIANCE_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-8;

/// Seed of the randomized tie-break used by the nine-run example.
pub const EXAMPLE6_SEED: u64 = 2;

fn labels(list: &[&str]) -> Vec<TermConfig> {
    list.iter()
        .map(|s| TermConfig::Label(s.to_string()))
        .collect()
}

const EXAMPLE5_TERMS: [&str; 8] = ["1", "a1", "a2", "a3", "a4", "a1*a2", "a1*a3", "a1*a4"];

/// The built-in configuration of example 4, 5 or 6.
pub fn builtin(example: u8) -> Option<RunConfig> {
    let mut config = match example {
        4 => RunConfig::main_effects(3),
        5 => RunConfig {
            terms: Some(labels(&EXAMPLE5_TERMS)),
            ..RunConfig::main_effects(4)
        },
        6 => {
            let mut terms = EXAMPLE5_TERMS.to_vec();
            terms.push("a2*a3");
            RunConfig {
                terms: Some(labels(&terms)),
                tie_break: TieBreakPolicy::SeededRandom,
                seed: EXAMPLE6_SEED,
                ..RunConfig::main_effects(4)
            }
        }
        _ => return None,
    };
    let term_count = config
        .terms
        .as_ref()
        .map_or(config_factor_count(&config) + 1, Vec::len);
    config.targets = Some((2..=term_count).collect());
    config.mode = Mode::Constrained;
    config.lambda = LambdaConfig::default();
    Some(config)
}

fn config_factor_count(config: &RunConfig) -> usize {
    match &config.factors {
        config::FactorsConfig::Count(n) => *n,
        config::FactorsConfig::List(l) => l.len(),
    }
}

/// The three-factor, four-run orthogonal array (a3 = a1 a2).
pub fn reference_l4() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        4,
        &[
            -1.0, -1.0, 1.0, 1.0, //
            -1.0, 1.0, -1.0, 1.0, //
            1.0, -1.0, -1.0, 1.0,
        ],
    )
}

/// The eight-run reference design (a4 = a1 a2 a3) as rows a1..a4, a1a2, a1a3, a1a4.
pub fn reference_l8() -> DMatrix<f64> {
    let spec = example5_spec();
    let base = enumerate_full_factorial(&two_level_factors(3));
    let points = DMatrix::from_fn(4, base.len(), |r, n| {
        if r < 3 {
            base.points()[(r, n)]
        } else {
            base.points().column(n).iter().product()
        }
    });
    term_rows(&spec, &points)
}

fn example5_spec() -> ModelSpec {
    let config = builtin(5).expect("example 5 exists");
    config::resolve(&config)
        .expect("built-in configuration resolves")
        .spec
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproduceReport {
    pub example: u8,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub solve: SolveReport,
}

impl ReproduceReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{verdict} example {} {}: {}\n",
                self.example, c.name, c.detail
            ));
        }
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!(
            "{verdict} example {}: {} runs, support {:?}\n",
            self.example,
            self.solve.design.runs.len(),
            self.solve.support
        ));
        out
    }
}

fn size_check(n: usize, expected: usize) -> Check {
    Check::new(
        "size",
        n == expected,
        format!("{n} runs, expected {expected}"),
    )
}

fn variance_checks(per: &[f64], total: f64, each: Option<f64>, expected_total: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    if let Some(v) = each {
        let worst = per.iter().map(|p| (p - v).abs()).fold(0.0, f64::max);
        checks.push(Check::new(
            "per-parameter variance",
            worst <= VARIANCE_TOL,
            format!("max |var - {v}| = {worst:.3e}"),
        ));
    }
    let err = (total - expected_total).abs();
    checks.push(Check::new(
        "total variance",
        err <= VARIANCE_TOL,
        format!("{total:.12} vs {expected_total}"),
    ));
    checks
}

/// Runs a built-in example and checks its expected outcome.
pub fn reproduce(example: u8) -> Result<ReproduceReport, CliError> {
    let config = builtin(example)
        .ok_or_else(|| CliError::config(format!("no built-in example {example}")))?;
    let resolved = config::resolve(&config)?;
    let outcome = run_solve(&config, Path::new("."), &resolved)?;
    let design = &outcome.design;
    let n = design.run_count();
    let variances = &outcome.report.variances;
    let mut checks = vec![Check::new(
        "convergence",
        outcome.report.status == "converged",
        outcome.report.status.clone(),
    )];

    match example {
        4 => {
            checks.push(size_check(n, 4));
            let eq = design_equivalent(&design.points, &reference_l4());
            checks.push(Check::new(
                "L4 equivalence",
                eq.equivalent,
                eq.reason
                    .unwrap_or_else(|| "matches the reference L4".into()),
            ));
            checks.extend(variance_checks(
                &variances.per_parameter,
                variances.total,
                Some(0.25),
                0.75,
            ));
        }
        5 => {
            checks.push(size_check(n, 8));
            let eq = design_equivalent(&design.term_rows(&resolved.spec), &reference_l8());
            checks.push(Check::new(
                "L8 equivalence",
                eq.equivalent,
                eq.reason
                    .unwrap_or_else(|| "term rows match the reference L8".into()),
            ));
            let levels: Vec<Vec<f64>> = resolved
                .spec
                .factors()
                .iter()
                .map(|f| f.levels().to_vec())
                .collect();
            let strength = oa_strength_check(&design.points, &levels, 2)?;
            checks.push(Check::new(
                "strength 2",
                strength,
                "all factor pairs balanced",
            ));
            checks.extend(variance_checks(
                &variances.per_parameter,
                variances.total,
                None,
                0.875,
            ));
        }
        _ => {
            checks.push(size_check(n, 9));
            let unbiased = check_unbiasedness(
                &resolved.model,
                resolved.spec.targets(),
                &outcome.solution.coefficients,
                FEASIBILITY_TOL,
            )?;
            let worst = unbiased.residuals.iter().copied().fold(0.0, f64::max);
            checks.push(Check::new(
                "unbiasedness",
                unbiased.passed,
                format!("max residual {worst:.3e}"),
            ));

            let ex5_spec = example5_spec();
            let ex5 = reproduce(5)?;
            let ex5_rows = term_rows(&ex5_spec, &ex5_points(&ex5));
            let rows = term_rows(&ex5_spec, &design.points);
            let subset = (0..n)
                .combinations(8)
                .find(|s| design_equivalent(&rows.select_columns(s), &ex5_rows).equivalent);
            checks.push(Check::new(
                "eight-run subset",
                subset.is_some(),
                match &subset {
                    Some(s) => format!(
                        "runs {:?} match the example 5 design",
                        s.iter().map(|r| r + 1).collect::<Vec<_>>()
                    ),
                    None => "no eight runs match the example 5 design".into(),
                },
            ));

            let oracle = min_norm_least_squares(
                &resolved.model,
                &outcome.solution.support,
                resolved.spec.targets(),
            )?;
            let oracle_total = variance_sum(&oracle, 1.0)?.total;
            let err = (variances.total - oracle_total).abs();
            checks.push(Check::new(
                "least-squares variance",
                err <= ORACLE_TOL,
                format!(
                    "{:.12} vs {oracle_total:.12} (difference {err:.3e})",
                    variances.total
                ),
            ));
        }
    }

    Ok(ReproduceReport {
        example,
        passed: checks.iter().all(|c| c.passed),
        checks,
        solve: outcome.report,
    })
}

fn ex5_points(report: &ReproduceReport) -> DMatrix<f64> {
    let d = &report.solve.design;
    DMatrix::from_fn(4, d.runs.len(), |r, n| d.rows[r][n])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_designs_are_orthogonal_arrays() {
        let levels = vec![vec![-1.0, 1.0]; 3];
        assert!(oa_strength_check(&reference_l4(), &levels, 2).unwrap());
        let l8 = reference_l8();
        assert_eq!(l8.shape(), (7, 8));
        let factor_rows = l8.rows(0, 4).into_owned();
        assert!(oa_strength_check(&factor_rows, &vec![vec![-1.0, 1.0]; 4], 2).unwrap());
    }

    #[test]
    fn builtin_configs_resolve() {
        for (e, terms, targets) in [(4, 4, 3), (5, 8, 7), (6, 9, 8)] {
            let r = config::resolve(&builtin(e).unwrap()).unwrap();
            assert_eq!(r.spec.terms().len(), terms);
            assert_eq!(r.spec.targets().len(), targets);
        }
        assert!(builtin(3).is_none());
    }
}
