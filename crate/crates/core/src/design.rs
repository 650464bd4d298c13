//! Factors, monomial models, candidate points and the model matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};

/// A factor with a finite, ordered list of distinct levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    name: String,
    levels: Vec<f64>,
}

impl Factor {
    pub fn new(name: impl Into<String>, levels: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if levels.is_empty() {
            return Err(DesignError::spec(format!("factor {name} has no levels")));
        }
        if levels.iter().any(|l| !l.is_finite()) {
            return Err(DesignError::spec(format!(
                "factor {name} has a non-finite level"
            )));
        }
        for (i, a) in levels.iter().enumerate() {
            if levels[..i].contains(a) {
                return Err(DesignError::spec(format!(
                    "factor {name} repeats level {a}"
                )));
            }
        }
        Ok(Factor { name, levels })
    }

    /// Two-level factor at (-1, 1).
    pub fn two_level(name: impl Into<String>) -> Self {
        Factor {
            name: name.into(),
            levels: vec![-1.0, 1.0],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Two-level factors named `a1..aF`.
pub fn two_level_factors(count: usize) -> Vec<Factor> {
    (1..=count)
        .map(|i| Factor::two_level(format!("a{i}")))
        .collect()
}

/// A monomial `a_1^e_1 * ... * a_F^e_F`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelTerm {
    exponents: Vec<u32>,
}

impl ModelTerm {
    pub fn new(exponents: Vec<u32>) -> Self {
        ModelTerm { exponents }
    }

    pub fn intercept(factors: usize) -> Self {
        ModelTerm::new(vec![0; factors])
    }

    /// Product of the listed factors (0-based), each to the first power.
    pub fn product(factors: usize, of: &[usize]) -> Self {
        let mut exponents = vec![0; factors];
        for &f in of {
            exponents[f] += 1;
        }
        ModelTerm::new(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn is_intercept(&self) -> bool {
        self.degree() == 0
    }

    /// The factor index when this is a first-order term in a single factor.
    pub fn main_effect(&self) -> Option<usize> {
        if self.degree() != 1 {
            return None;
        }
        self.exponents.iter().position(|&e| e == 1)
    }

    /// Renders the monomial as `a1*a3`, `a2^2` or `1` for the intercept.
    pub fn label(&self, factors: &[Factor]) -> String {
        let parts: Vec<String> = self
            .exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(f, &e)| {
                let name = factors
                    .get(f)
                    .map_or_else(|| format!("a{}", f + 1), |x| x.name.clone());
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

/// Factors, the ordered term list and the target parameters (0-based term indices).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    factors: Vec<Factor>,
    terms: Vec<ModelTerm>,
    targets: Vec<usize>,
}

impl ModelSpec {
    pub fn new(factors: Vec<Factor>, terms: Vec<ModelTerm>, targets: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(DesignError::spec("at least one factor is required"));
        }
        if terms.is_empty() {
            return Err(DesignError::spec("the model has no terms"));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.exponents.len() != factors.len() {
                return Err(DesignError::spec(format!(
                    "term {} has {} exponents, expected {}",
                    i,
                    t.exponents.len(),
                    factors.len()
                )));
            }
            if terms[..i].contains(t) {
                return Err(DesignError::spec(format!("term {i} is listed twice")));
            }
        }
        for (i, f) in factors.iter().enumerate() {
            if factors[..i].iter().any(|o| o.name == f.name) {
                return Err(DesignError::spec(format!(
                    "factor name {} is listed twice",
                    f.name
                )));
            }
        }
        let mut targets = targets;
        targets.sort_unstable();
        targets.dedup();
        if targets.is_empty() {
            return Err(DesignError::spec("no target parameters"));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= terms.len()) {
            return Err(DesignError::spec(format!(
                "target {t} is out of range for {} terms",
                terms.len()
            )));
        }
        Ok(ModelSpec {
            factors,
            terms,
            targets,
        })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn terms(&self) -> &[ModelTerm] {
        &self.terms
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.label(&self.factors)).collect()
    }
}

/// Candidate design points, one column per point.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    points: DMatrix<f64>,
}

impl CandidateSet {
    /// Wraps an F x G point matrix after checking every entry is a level of its factor.
    pub fn new(points: DMatrix<f64>, factors: &[Factor]) -> Result<Self> {
        if points.nrows() != factors.len() {
            return Err(DesignError::spec(format!(
                "candidate points have {} coordinates, expected {}",
                points.nrows(),
                factors.len()
            )));
        }
        if points.ncols() == 0 {
            return Err(DesignError::spec("the candidate set is empty"));
        }
        for g in 0..points.ncols() {
            for (f, factor) in factors.iter().enumerate() {
                let v = points[(f, g)];
                if !factor.levels.contains(&v) {
                    return Err(DesignError::spec(format!(
                        "candidate {g} sets {} to {v}, which is not one of its levels",
                        factor.name
                    )));
                }
            }
        }
        Ok(CandidateSet { points })
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn factor_count(&self) -> usize {
        self.points.nrows()
    }

    pub fn point(&self, g: usize) -> Vec<f64> {
        self.points.column(g).iter().copied().collect()
    }

    /// Index of the first candidate equal to `point`.
    pub fn position(&self, point: &[f64]) -> Option<usize> {
        (0..self.len()).find(|&g| self.points.column(g).iter().eq(point.iter()))
    }

    /// Columns `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> DMatrix<f64> {
        self.points.select_columns(indices)
    }
}

/// All level combinations, first factor varying slowest.
pub fn enumerate_full_factorial(factors: &[Factor]) -> CandidateSet {
    let rows = factors.len();
    let total: usize = factors.iter().map(|f| f.levels.len()).product();
    let mut points = DMatrix::zeros(rows, total);
    let mut index = vec![0usize; rows];
    for g in 0..total {
        for (f, factor) in factors.iter().enumerate() {
            points[(f, g)] = factor.levels[index[f]];
        }
        // odometer increment, last factor fastest
        for f in (0..rows).rev() {
            index[f] += 1;
            if index[f] < factors[f].levels.len() {
                break;
            }
            index[f] = 0;
        }
    }
    CandidateSet { points }
}

/// Evaluates a monomial at a point; `0^0` is 1.
pub fn evaluate_term(point: &[f64], term: &ModelTerm) -> f64 {
    debug_assert_eq!(point.len(), term.exponents.len());
    let mut value = 1.0;
    for (&x, &e) in point.iter().zip(&term.exponents) {
        for _ in 0..e {
            value *= x;
        }
    }
    value
}

/// Model terms evaluated at every candidate, |terms| x G.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    values: DMatrix<f64>,
}

impl ModelMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(DesignError::spec("model matrix must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DesignError::spec("model matrix has non-finite entries"));
        }
        Ok(ModelMatrix { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Number of model terms.
    pub fn term_count(&self) -> usize {
        self.values.nrows()
    }

    /// Number of candidates.
    pub fn candidate_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, g: usize) -> DVector<f64> {
        self.values.column(g).into_owned()
    }

    pub fn select_columns(&self, indices: &[usize]) -> DMatrix<f64> {
        self.values.select_columns(indices)
    }
}

pub fn build_model_matrix(candidates: &CandidateSet, spec: &ModelSpec) -> Result<ModelMatrix> {
    if candidates.factor_count() != spec.factors.len() {
        return Err(DesignError::spec(format!(
            "candidates have {} factors but the model has {}",
            candidates.factor_count(),
            spec.factors.len()
        )));
    }
    let g_count = candidates.len();
    let mut values = DMatrix::zeros(spec.terms.len(), g_count);
    for g in 0..g_count {
        let point = candidates.point(g);
        for (j, term) in spec.terms.iter().enumerate() {
            values[(j, g)] = evaluate_term(&point, term);
        }
    }
    Ok(ModelMatrix { values })
}

/// Repeats column `g` `multiplicities[g]` times, keeping the original order.
pub fn duplicate_columns(
    candidates: &CandidateSet,
    multiplicities: &[usize],
) -> Result<CandidateSet> {
    if multiplicities.len() != candidates.len() {
        return Err(DesignError::spec(format!(
            "{} multiplicities given for {} candidates",
            multiplicities.len(),
            candidates.len()
        )));
    }
    if let Some(g) = multiplicities.iter().position(|&m| m == 0) {
        return Err(DesignError::spec(format!(
            "multiplicity of candidate {g} is zero"
        )));
    }
    let indices: Vec<usize> = multiplicities
        .iter()
        .enumerate()
        .flat_map(|(g, &m)| std::iter::repeat_n(g, m))
        .collect();
    Ok(CandidateSet {
        points: candidates.select(&indices),
    })
}

/// Intercept plus first-order terms for `factors` factors.
pub fn main_effect_terms(factors: usize) -> Vec<ModelTerm> {
    std::iter::once(ModelTerm::intercept(factors))
        .chain((0..factors).map(|f| ModelTerm::product(factors, &[f])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_one() -> CandidateSet {
        enumerate_full_factorial(&two_level_factors(3))
    }

    #[test]
    fn full_factorial_matches_three_factor_layout() {
        let c = example_one();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(3, 8, &[
            -1., -1., -1., -1., 1., 1., 1., 1.,
            -1., -1., 1., 1., -1., -1., 1., 1.,
            -1., 1., -1., 1., -1., 1., -1., 1.,
        ]);
        assert_eq!(c.points(), &expected);
    }

    #[test]
    fn single_factor_enumeration() {
        let c = enumerate_full_factorial(&[Factor::new("x", vec![0.0, 1.0]).unwrap()]);
        assert_eq!(c.points(), &DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
    }

    #[test]
    fn mixed_levels_give_distinct_columns() {
        let factors = vec![
            Factor::new("p", vec![0.0, 1.0]).unwrap(),
            Factor::new("q", vec![-1.0, 0.0, 1.0]).unwrap(),
        ];
        let c = enumerate_full_factorial(&factors);
        assert_eq!(c.len(), 6);
        for a in 0..6 {
            for b in 0..a {
                assert_ne!(c.point(a), c.point(b));
            }
        }
    }

    #[test]
    fn term_evaluation() {
        assert_eq!(
            evaluate_term(&[-1., -1., -1.], &ModelTerm::new(vec![1, 0, 0])),
            -1.0
        );
        assert_eq!(
            evaluate_term(&[0.0, 3.5, -2.0], &ModelTerm::intercept(3)),
            1.0
        );
        assert_eq!(
            evaluate_term(&[-1., 1., -1.], &ModelTerm::new(vec![1, 0, 1])),
            1.0
        );
        assert_eq!(
            evaluate_term(&[2.0, 3.0], &ModelTerm::new(vec![2, 1])),
            12.0
        );
    }

    #[test]
    fn main_effect_model_matrix() {
        let c = example_one();
        let spec =
            ModelSpec::new(two_level_factors(3), main_effect_terms(3), vec![1, 2, 3]).unwrap();
        let m = build_model_matrix(&c, &spec).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 8, &[
            1., 1., 1., 1., 1., 1., 1., 1.,
            -1., -1., -1., -1., 1., 1., 1., 1.,
            -1., -1., 1., 1., -1., -1., 1., 1.,
            -1., 1., -1., 1., -1., 1., -1., 1.,
        ]);
        assert_eq!(m.values(), &expected);
    }

    #[test]
    fn intercept_only_row_is_ones() {
        let c = example_one();
        let spec =
            ModelSpec::new(two_level_factors(3), vec![ModelTerm::intercept(3)], vec![0]).unwrap();
        let m = build_model_matrix(&c, &spec).unwrap();
        assert!(m.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn all_ones_point_gives_all_ones_column() {
        let mut terms = main_effect_terms(4);
        terms.extend(
            [&[0, 1][..], &[0, 2], &[0, 3]]
                .iter()
                .map(|p| ModelTerm::product(4, p)),
        );
        let spec = ModelSpec::new(two_level_factors(4), terms, (1..8).collect()).unwrap();
        let c = enumerate_full_factorial(spec.factors());
        let m = build_model_matrix(&c, &spec).unwrap();
        assert!(m.column(c.len() - 1).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rows_are_orthogonal_for_two_level_models() {
        for f in [3, 4] {
            let spec = ModelSpec::new(two_level_factors(f), main_effect_terms(f), vec![1]).unwrap();
            let c = enumerate_full_factorial(spec.factors());
            let m = build_model_matrix(&c, &spec).unwrap();
            let gram = m.values() * m.values().transpose();
            let g = c.len() as f64;
            assert_eq!(gram, DMatrix::identity(f + 1, f + 1) * g);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let c = example_one();
        let spec = ModelSpec::new(two_level_factors(2), main_effect_terms(2), vec![1]).unwrap();
        assert!(matches!(
            build_model_matrix(&c, &spec),
            Err(DesignError::Specification(_))
        ));
    }

    #[test]
    fn duplication() {
        let c = example_one();
        assert_eq!(duplicate_columns(&c, &[1; 8]).unwrap(), c);
        assert_eq!(duplicate_columns(&c, &[2; 8]).unwrap().len(), 16);
        let two = enumerate_full_factorial(&two_level_factors(1));
        let d = duplicate_columns(&two, &[2, 1]).unwrap();
        assert_eq!(d.points(), &DMatrix::from_row_slice(1, 3, &[-1., -1., 1.]));
        assert!(duplicate_columns(&two, &[0, 1]).is_err());
        assert!(duplicate_columns(&two, &[1]).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(Factor::new("x", vec![]).is_err());
        assert!(Factor::new("x", vec![1.0, 1.0]).is_err());
        let f = two_level_factors(2);
        assert!(ModelSpec::new(vec![], vec![], vec![0]).is_err());
        assert!(ModelSpec::new(f.clone(), main_effect_terms(2), vec![]).is_err());
        assert!(ModelSpec::new(f.clone(), main_effect_terms(2), vec![3]).is_err());
        let dup = vec![ModelTerm::intercept(2), ModelTerm::intercept(2)];
        assert!(ModelSpec::new(f.clone(), dup, vec![0]).is_err());
        assert!(ModelSpec::new(f, vec![ModelTerm::new(vec![1])], vec![0]).is_err());
    }

    #[test]
    fn candidate_levels_are_checked() {
        let f = two_level_factors(1);
        assert!(CandidateSet::new(DMatrix::from_row_slice(1, 2, &[-1.0, 0.5]), &f).is_err());
        assert!(CandidateSet::new(DMatrix::from_row_slice(1, 2, &[-1.0, -1.0]), &f).is_ok());
    }

    #[test]
    fn labels() {
        let f = two_level_factors(4);
        assert_eq!(ModelTerm::product(4, &[0, 2]).label(&f), "a1*a3");
        assert_eq!(ModelTerm::intercept(4).label(&f), "1");
        assert_eq!(ModelTerm::new(vec![2, 0, 0, 1]).label(&f), "a1^2*a4");
    }
}
