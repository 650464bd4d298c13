//! JSON run configuration and its resolution into library objects.
//!
//! Candidate, term and target indices in a configuration are 1-based.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::design::{
    build_model_matrix, duplicate_columns, enumerate_full_factorial, main_effect_terms,
    CandidateSet, Factor, ModelMatrix, ModelSpec, ModelTerm,
};
use crate::solver::SolverOptions;
use crate::weights::TieBreak;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorsConfig {
    /// `n` two-level factors named a1..an.
    Count(usize),
    List(Vec<FactorConfig>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub name: String,
    #[serde(default = "two_levels")]
    pub levels: Vec<f64>,
}

fn two_levels() -> Vec<f64> {
    vec![-1.0, 1.0]
}

/// A model term as an exponent vector or a monomial label such as `a1*a3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TermConfig {
    Exponents(Vec<u32>),
    Label(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Constrained,
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaConfig {
    Uniform(f64),
    PerTarget(Vec<f64>),
}

/// `"auto"`, an explicit list, or the path of a file holding the list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaConfig {
    List(Vec<f64>),
    Text(String),
}

impl Default for LambdaConfig {
    fn default() -> Self {
        LambdaConfig::Text("auto".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreakPolicy {
    #[default]
    SmallestIndex,
    SeededRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub factors: FactorsConfig,
    /// Defaults to the intercept plus every main effect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TermConfig>>,
    /// Defaults to every non-intercept term.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<usize>>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<KappaConfig>,
    #[serde(default)]
    pub lambda: LambdaConfig,
    #[serde(default = "unit_scale")]
    pub lambda_scale: f64,
    #[serde(default)]
    pub tie_break: TieBreakPolicy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_points: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<Vec<usize>>,
    /// Explicit candidate points, one list of factor levels per candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub seed: u64,
}

fn unit_scale() -> f64 {
    1.0
}

impl RunConfig {
    /// A main-effect configuration with `factors` two-level factors.
    pub fn main_effects(factors: usize) -> Self {
        RunConfig {
            factors: FactorsConfig::Count(factors),
            terms: None,
            targets: None,
            mode: Mode::Constrained,
            kappa: None,
            lambda: LambdaConfig::default(),
            lambda_scale: 1.0,
            tie_break: TieBreakPolicy::SmallestIndex,
            fixed_points: Vec::new(),
            multiplicities: None,
            candidates: None,
            solver: SolverOptions::default(),
            seed: 0,
        }
    }

    pub fn tie_break(&self) -> TieBreak {
        match self.tie_break {
            TieBreakPolicy::SmallestIndex => TieBreak::SmallestIndex,
            TieBreakPolicy::SeededRandom => TieBreak::SeededRandom(self.seed),
        }
    }
}

/// Reads a configuration file; relative lambda paths resolve against its directory.
pub fn load(path: &Path) -> Result<(RunConfig, PathBuf), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("invalid configuration {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

/// Reads weights from a JSON array or from numbers separated by commas or whitespace.
pub fn read_lambda_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(list) = serde_json::from_str::<Vec<f64>>(&text) {
        return Ok(list);
    }
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::config(format!("{}: '{s}' is not a number", path.display())))
        })
        .collect()
}

/// Library objects built from a configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: ModelSpec,
    pub candidates: CandidateSet,
    pub model: ModelMatrix,
}

fn factors_of(config: &FactorsConfig) -> Result<Vec<Factor>, CliError> {
    let factors = match config {
        FactorsConfig::Count(n) => crate::design::two_level_factors(*n),
        FactorsConfig::List(list) => list
            .iter()
            .map(|f| Factor::new(f.name.clone(), f.levels.clone()))
            .collect::<crate::Result<Vec<_>>>()?,
    };
    if factors.is_empty() {
        return Err(CliError::config("at least one factor is required"));
    }
    for f in &factors {
        let name = f.name();
        if name.is_empty()
            || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            || name == "1"
        {
            return Err(CliError::config(format!(
                "factor name '{name}' must be alphanumeric (underscores allowed)"
            )));
        }
    }
    Ok(factors)
}

/// Parses `1`, `a1`, `a1*a3` or `a1^2*a4` against the factor names.
pub fn parse_term(label: &str, factors: &[Factor]) -> Result<ModelTerm, CliError> {
    let mut exponents = vec![0u32; factors.len()];
    let label = label.trim();
    if label == "1" {
        return Ok(ModelTerm::new(exponents));
    }
    for part in label.split('*') {
        let (name, power) = match part.split_once('^') {
            Some((n, p)) => (
                n.trim(),
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| CliError::config(format!("bad exponent in term '{label}'")))?,
            ),
            None => (part.trim(), 1),
        };
        let f = factors
            .iter()
            .position(|f| f.name() == name)
            .ok_or_else(|| {
                CliError::config(format!("term '{label}' names unknown factor '{name}'"))
            })?;
        exponents[f] += power;
    }
    Ok(ModelTerm::new(exponents))
}

pub fn resolve(config: &RunConfig) -> Result<Resolved, CliError> {
    let factors = factors_of(&config.factors)?;
    let f = factors.len();
    let terms = match &config.terms {
        None => main_effect_terms(f),
        Some(list) => list
            .iter()
            .map(|t| match t {
                TermConfig::Exponents(e) => Ok(ModelTerm::new(e.clone())),
                TermConfig::Label(l) => parse_term(l, &factors),
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let targets = match &config.targets {
        None => (0..terms.len())
            .filter(|&t| !terms[t].is_intercept())
            .collect(),
        Some(list) => one_based(list, terms.len(), "target")?,
    };
    let spec = ModelSpec::new(factors, terms, targets)?;

    let mut candidates = match &config.candidates {
        None => enumerate_full_factorial(spec.factors()),
        Some(points) => {
            if let Some((g, p)) = points.iter().enumerate().find(|(_, p)| p.len() != f) {
                return Err(CliError::config(format!(
                    "candidate {} has {} coordinates, expected {f}",
                    g + 1,
                    p.len()
                )));
            }
            let matrix = DMatrix::from_fn(f, points.len(), |r, g| points[g][r]);
            CandidateSet::new(matrix, spec.factors())?
        }
    };
    if let Some(mult) = &config.multiplicities {
        candidates = duplicate_columns(&candidates, mult)?;
    }
    let model = build_model_matrix(&candidates, &spec)?;
    Ok(Resolved {
        spec,
        candidates,
        model,
    })
}

/// Converts 1-based indices to 0-based after a range check.
pub fn one_based(list: &[usize], len: usize, what: &str) -> Result<Vec<usize>, CliError> {
    list.iter()
        .map(|&i| {
            if i == 0 || i > len {
                Err(CliError::config(format!("{what} {i} is outside 1..={len}")))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c: RunConfig = serde_json::from_str(r#"{"factors": 3}"#).unwrap();
        let r = resolve(&c).unwrap();
        assert_eq!(r.candidates.len(), 8);
        assert_eq!(r.spec.targets(), &[1, 2, 3]);
        assert_eq!(c.lambda, LambdaConfig::Text("auto".into()));
        assert_eq!(c.lambda_scale, 1.0);
    }

    #[test]
    fn labels_and_exponents_agree() {
        let c: RunConfig = serde_json::from_str(
            r#"{"factors": [{"name": "x"}, {"name": "y", "levels": [0, 1, 2]}],
                "terms": ["1", "x", [0, 1], "x*y^2"], "targets": [2, 4]}"#,
        )
        .unwrap();
        let r = resolve(&c).unwrap();
        assert_eq!(r.spec.terms()[3].exponents(), &[1, 2]);
        assert_eq!(r.spec.targets(), &[1, 3]);
        assert_eq!(r.candidates.len(), 6);
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        for text in [
            r#"{"factors": 3, "targets": [0]}"#,
            r#"{"factors": 3, "targets": [5]}"#,
            r#"{"factors": 3, "terms": ["a9"]}"#,
            r#"{"factors": [{"name": "a*b"}]}"#,
            r#"{"factors": 3, "candidates": [[1, 1]]}"#,
            r#"{"factors": 3, "multiplicities": [1, 2]}"#,
        ] {
            let c: RunConfig = serde_json::from_str(text).unwrap();
            assert_eq!(
                resolve(&c).unwrap_err().code,
                super::super::exit::CONFIG,
                "{text}"
            );
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"factors": 3, "typo": 1}"#).is_err());
    }

    #[test]
    fn multiplicities_expand_candidates() {
        let c: RunConfig =
            serde_json::from_str(r#"{"factors": 3, "multiplicities": [2, 2, 2, 2, 2, 2, 2, 2]}"#)
                .unwrap();
        assert_eq!(resolve(&c).unwrap().candidates.len(), 16);
    }

    #[test]
    fn round_trips_through_json() {
        let mut c = RunConfig::main_effects(4);
        c.kappa = Some(KappaConfig::PerTarget(vec![1.0, 2.0]));
        c.fixed_points = vec![3];
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }
}
