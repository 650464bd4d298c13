//! Verification of designs and estimators: unbiasedness, variances, Monte
//! Carlo checks, orthogonal-array strength, design equivalence and an
//! exhaustive A-optimality oracle.

use std::collections::HashMap;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::design::{evaluate_term, CandidateSet, ModelMatrix, ModelSpec};
use crate::error::{DesignError, Result};
use crate::linalg;

/// Residual on `|M_S b - e_j|` below which a support counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Relative tolerance for ties in the oracle's optimal value.
pub const ORACLE_TIE_TOL: f64 = 1e-9;

/// Largest number of supports the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 10_000_000;

/// Selected runs together with the linear estimators restricted to them.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    /// F x n, one column per run.
    pub points: DMatrix<f64>,
    /// Candidate index of each run.
    pub source_indices: Vec<usize>,
    /// |J| x n, estimator coefficients on the runs.
    pub estimators: DMatrix<f64>,
    /// `|beta_j|^2` per target, i.e. the variance at unit noise.
    pub variances: Vec<f64>,
}

impl DesignMatrix {
    /// Restricts a full |J| x G coefficient block to `support`.
    pub fn from_coefficients(
        candidates: &CandidateSet,
        coefficients: &DMatrix<f64>,
        support: &[usize],
    ) -> Result<Self> {
        if coefficients.ncols() != candidates.len() {
            return Err(DesignError::spec(format!(
                "{} coefficient columns for {} candidates",
                coefficients.ncols(),
                candidates.len()
            )));
        }
        if let Some(&g) = support.iter().find(|&&g| g >= candidates.len()) {
            return Err(DesignError::spec(format!("support index {g} out of range")));
        }
        let estimators = coefficients.select_columns(support);
        let variances = estimators.row_iter().map(|r| r.norm_squared()).collect();
        Ok(DesignMatrix {
            points: candidates.select(support),
            source_indices: support.to_vec(),
            estimators,
            variances,
        })
    }

    pub fn run_count(&self) -> usize {
        self.points.ncols()
    }

    /// Rows of every non-intercept model term evaluated at the runs.
    pub fn term_rows(&self, spec: &ModelSpec) -> DMatrix<f64> {
        term_rows(spec, &self.points)
    }
}

/// Evaluates the non-intercept terms of `spec` at the columns of `points`.
pub fn term_rows(spec: &ModelSpec, points: &DMatrix<f64>) -> DMatrix<f64> {
    let terms: Vec<_> = spec.terms().iter().filter(|t| !t.is_intercept()).collect();
    let runs: Vec<Vec<f64>> = points
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    DMatrix::from_fn(terms.len(), runs.len(), |r, n| {
        evaluate_term(&runs[n], terms[r])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessReport {
    /// `|M beta_j - e_j|_inf` per target.
    pub residuals: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `M beta_j = e_j` for every target row of `b` in the max norm.
pub fn check_unbiasedness(
    m: &ModelMatrix,
    targets: &[usize],
    b: &DMatrix<f64>,
    tol: f64,
) -> Result<UnbiasednessReport> {
    if b.shape() != (targets.len(), m.candidate_count()) {
        return Err(DesignError::spec(format!(
            "coefficient block is {}x{}, expected {}x{}",
            b.nrows(),
            b.ncols(),
            targets.len(),
            m.candidate_count()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= m.term_count()) {
        return Err(DesignError::spec(format!("target {t} out of range")));
    }
    let residuals: Vec<f64> = targets
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let mut r = m.values() * b.row(j).transpose();
            r[t] -= 1.0;
            r.amax()
        })
        .collect();
    let passed = residuals.iter().all(|&r| r <= tol);
    Ok(UnbiasednessReport {
        residuals,
        tolerance: tol,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub total: f64,
    pub per_parameter: Vec<f64>,
}

/// `sigma^2 |beta_j|^2` per row of `b` and their sum.
pub fn variance_sum(b: &DMatrix<f64>, sigma_sq: f64) -> Result<VarianceReport> {
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(DesignError::spec(format!(
            "noise variance must be positive, got {sigma_sq}"
        )));
    }
    let per_parameter: Vec<f64> = b.row_iter().map(|r| sigma_sq * r.norm_squared()).collect();
    Ok(VarianceReport {
        total: per_parameter.iter().sum(),
        per_parameter,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloParameter {
    pub target: usize,
    pub expected_mean: f64,
    pub empirical_mean: f64,
    pub mean_tolerance: f64,
    pub expected_variance: f64,
    pub empirical_variance: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub draws: usize,
    pub parameters: Vec<MonteCarloParameter>,
    pub passed: bool,
}

/// Simulates responses `R = M^T gamma + eps` and the estimates `R . beta_j`.
///
/// The empirical mean must lie within `4 sigma |beta_j| / sqrt(n)` of
/// `gamma_j` and the empirical variance within 10% of `sigma^2 |beta_j|^2`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_estimator_check(
    m: &ModelMatrix,
    targets: &[usize],
    b: &DMatrix<f64>,
    gamma_true: &[f64],
    sigma_sq: f64,
    n_draws: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if gamma_true.len() != m.term_count() {
        return Err(DesignError::spec(format!(
            "{} true parameters for {} model terms",
            gamma_true.len(),
            m.term_count()
        )));
    }
    if !(sigma_sq >= 0.0 && sigma_sq.is_finite()) {
        return Err(DesignError::spec(format!(
            "noise variance must be non-negative, got {sigma_sq}"
        )));
    }
    if n_draws < 2 {
        return Err(DesignError::spec("at least two draws are needed"));
    }
    let unbiased = check_unbiasedness(m, targets, b, FEASIBILITY_TOL)?;
    if let Some((j, &r)) = unbiased
        .residuals
        .iter()
        .enumerate()
        .find(|(_, &r)| r > FEASIBILITY_TOL)
    {
        return Err(DesignError::Biased {
            target: targets[j],
            residual: r,
        });
    }

    let sigma = sigma_sq.sqrt();
    let noise = Normal::new(0.0, sigma).map_err(|e| DesignError::spec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = m.values().transpose() * DVector::from_column_slice(gamma_true);
    let rows = targets.len();
    let mut eps = DVector::zeros(m.candidate_count());
    // Welford accumulators keep noiseless draws exact
    let mut mean = vec![0.0; rows];
    let mut m2 = vec![0.0; rows];
    for k in 1..=n_draws {
        for e in eps.iter_mut() {
            *e = noise.sample(&mut rng);
        }
        let response = &signal + &eps;
        for j in 0..rows {
            let estimate = b.row(j).transpose().dot(&response);
            let delta = estimate - mean[j];
            mean[j] += delta / k as f64;
            m2[j] += delta * (estimate - mean[j]);
        }
    }

    let parameters: Vec<MonteCarloParameter> = (0..rows)
        .map(|j| {
            let norm = b.row(j).norm();
            let expected_mean = gamma_true[targets[j]];
            let expected_variance = sigma_sq * norm * norm;
            let mean_tolerance = 4.0 * sigma * norm / (n_draws as f64).sqrt();
            let empirical_variance = m2[j] / (n_draws - 1) as f64;
            MonteCarloParameter {
                target: targets[j],
                expected_mean,
                empirical_mean: mean[j],
                mean_tolerance,
                expected_variance,
                empirical_variance,
                mean_ok: (mean[j] - expected_mean).abs() <= mean_tolerance,
                variance_ok: (empirical_variance - expected_variance).abs()
                    <= 0.1 * expected_variance,
            }
        })
        .collect();
    let passed = parameters.iter().all(|p| p.mean_ok && p.variance_ok);
    Ok(MonteCarloReport {
        draws: n_draws,
        parameters,
        passed,
    })
}

/// Minimum-norm unbiased estimators on `support`, embedded into |J| x G.
pub fn min_norm_least_squares(
    m: &ModelMatrix,
    support: &[usize],
    targets: &[usize],
) -> Result<DMatrix<f64>> {
    if let Some(&g) = support.iter().find(|&&g| g >= m.candidate_count()) {
        return Err(DesignError::spec(format!("support index {g} out of range")));
    }
    if !support.iter().all_unique() {
        return Err(DesignError::spec("support indices must be distinct"));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= m.term_count()) {
        return Err(DesignError::spec(format!("target {t} out of range")));
    }
    let m_s = m.select_columns(support);
    let pinv = linalg::pseudo_inverse(&m_s);
    let mut b = DMatrix::zeros(targets.len(), m.candidate_count());
    for (j, &t) in targets.iter().enumerate() {
        let e = linalg::unit(m.term_count(), t);
        let beta = &pinv * &e;
        let residual = (&m_s * &beta - &e).amax();
        if residual > FEASIBILITY_TOL {
            return Err(DesignError::Infeasible {
                target: t,
                residual,
            });
        }
        for (s, &g) in support.iter().enumerate() {
            b[(j, g)] = beta[s];
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Smallest variance sum over feasible supports, if any is feasible.
    pub optimal_value: Option<f64>,
    pub optimal_supports: Vec<Vec<usize>>,
    pub evaluated_count: u64,
    pub feasible_count: u64,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exhaustive A-optimality over every support of size `n`.
pub fn brute_force_a_optimal(m: &ModelMatrix, targets: &[usize], n: usize) -> Result<OracleResult> {
    let g_count = m.candidate_count();
    let count = binomial(g_count, n);
    if count > ORACLE_LIMIT {
        return Err(DesignError::SizeGuard {
            count,
            limit: ORACLE_LIMIT,
        });
    }
    let mut best: Option<f64> = None;
    let mut supports: Vec<Vec<usize>> = Vec::new();
    let mut evaluated = 0u64;
    let mut feasible = 0u64;
    for support in (0..g_count).combinations(n) {
        evaluated += 1;
        let value = match min_norm_least_squares(m, &support, targets) {
            Ok(b) => b.norm_squared(),
            Err(DesignError::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        feasible += 1;
        match best {
            Some(v) if value > v + ORACLE_TIE_TOL * v.abs().max(1.0) => {}
            Some(v) if value >= v - ORACLE_TIE_TOL * v.abs().max(1.0) => supports.push(support),
            _ => {
                best = Some(value);
                supports = vec![support];
            }
        }
    }
    Ok(OracleResult {
        optimal_value: best,
        optimal_supports: supports,
        evaluated_count: evaluated,
        feasible_count: feasible,
    })
}

/// Orthogonal-array strength check.
///
/// `levels[r]` lists the admissible levels of row `r`. Passes iff for every
/// set of `strength` rows, every combination of their levels occurs equally
/// often among the columns.
pub fn oa_strength_check(
    points: &DMatrix<f64>,
    levels: &[Vec<f64>],
    strength: usize,
) -> Result<bool> {
    let rows = points.nrows();
    if levels.len() != rows {
        return Err(DesignError::spec(format!(
            "{} level lists for {rows} rows",
            levels.len()
        )));
    }
    if strength > rows {
        return Err(DesignError::spec(format!(
            "strength {strength} exceeds {rows} factors"
        )));
    }
    let mut codes = vec![vec![0usize; points.ncols()]; rows];
    for r in 0..rows {
        for (n, &x) in points.row(r).iter().enumerate() {
            codes[r][n] = match levels[r].iter().position(|&l| l == x) {
                Some(i) => i,
                None => return Ok(false),
            };
        }
    }
    for subset in (0..rows).combinations(strength) {
        let cells: usize = subset.iter().map(|&r| levels[r].len()).product();
        if !points.ncols().is_multiple_of(cells) {
            return Ok(false);
        }
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for n in 0..points.ncols() {
            let cell = subset.iter().map(|&r| codes[r][n]).collect();
            *counts.entry(cell).or_default() += 1;
        }
        let each = points.ncols() / cells;
        if counts.len() != cells || counts.values().any(|&c| c != each) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equivalence {
    pub equivalent: bool,
    /// Why the designs could not be compared, when they could not.
    pub reason: Option<String>,
}

impl Equivalence {
    fn rejected(reason: impl Into<String>) -> Self {
        Equivalence {
            equivalent: false,
            reason: Some(reason.into()),
        }
    }
}

/// Rows recoded to -1 (smaller level) and +1 (larger level).
fn signed_rows(d: &DMatrix<f64>) -> std::result::Result<Vec<Vec<i8>>, String> {
    d.row_iter()
        .enumerate()
        .map(|(r, row)| {
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if row.iter().any(|&x| x != lo && x != hi) {
                return Err(format!("row {r} has more than two levels"));
            }
            Ok(row.iter().map(|&x| if x == lo { -1 } else { 1 }).collect())
        })
        .collect()
}

/// Whether run permutation, row permutation and per-row level swaps map
/// `d1` onto `d2`.
///
/// Rows are matched one at a time; after each assignment the multisets of
/// partial columns must agree, which prunes most of the search.
pub fn design_equivalent(d1: &DMatrix<f64>, d2: &DMatrix<f64>) -> Equivalence {
    if d1.shape() != d2.shape() {
        return Equivalence::rejected(format!(
            "shapes differ: {}x{} vs {}x{}",
            d1.nrows(),
            d1.ncols(),
            d2.nrows(),
            d2.ncols()
        ));
    }
    let (a, b) = match (signed_rows(d1), signed_rows(d2)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) => return Equivalence::rejected(format!("first design: {e}")),
        (_, Err(e)) => return Equivalence::rejected(format!("second design: {e}")),
    };
    let mut used = vec![false; a.len()];
    let mut chosen: Vec<(usize, i8)> = Vec::with_capacity(a.len());
    Equivalence {
        equivalent: match_rows(&a, &b, &mut used, &mut chosen),
        reason: None,
    }
}

fn prefixes_agree(a: &[Vec<i8>], b: &[Vec<i8>], chosen: &[(usize, i8)]) -> bool {
    let k = chosen.len();
    let runs = a.first().map_or(0, |r| r.len());
    let mut left: Vec<Vec<i8>> = (0..runs)
        .map(|n| (0..k).map(|r| a[r][n]).collect())
        .collect();
    let mut right: Vec<Vec<i8>> = (0..runs)
        .map(|n| chosen.iter().map(|&(r, s)| s * b[r][n]).collect())
        .collect();
    left.sort_unstable();
    right.sort_unstable();
    left == right
}

fn match_rows(
    a: &[Vec<i8>],
    b: &[Vec<i8>],
    used: &mut [bool],
    chosen: &mut Vec<(usize, i8)>,
) -> bool {
    if chosen.len() == a.len() {
        return true;
    }
    for r in 0..b.len() {
        if used[r] {
            continue;
        }
        for sign in [1i8, -1] {
            chosen.push((r, sign));
            if prefixes_agree(a, b, chosen) {
                used[r] = true;
                if match_rows(a, b, used, chosen) {
                    return true;
                }
                used[r] = false;
            }
            chosen.pop();
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{
        build_model_matrix, enumerate_full_factorial, main_effect_terms, two_level_factors,
    };

    fn example2() -> (ModelSpec, CandidateSet, ModelMatrix) {
        let spec =
            ModelSpec::new(two_level_factors(3), main_effect_terms(3), vec![1, 2, 3]).unwrap();
        let c = enumerate_full_factorial(spec.factors());
        let m = build_model_matrix(&c, &spec).unwrap();
        (spec, c, m)
    }

    #[rustfmt::skip]
    fn l4_block() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 8, &[
            -1., 0., 0., -1., 0., 1., 1., 0.,
            -1., 0., 0., 1., 0., -1., 1., 0.,
            -1., 0., 0., 1., 0., 1., -1., 0.,
        ]) / 4.0
    }

    #[rustfmt::skip]
    fn table1() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 4, &[
            -1., -1., 1., 1.,
            -1., 1., -1., 1.,
            -1., 1., 1., -1.,
        ])
    }

    #[test]
    fn l4_block_is_unbiased_exactly() {
        let (_, _, m) = example2();
        let r = check_unbiasedness(&m, &[1, 2, 3], &l4_block(), 0.0).unwrap();
        assert!(r.passed);
        assert_eq!(r.residuals, vec![0.0; 3]);
    }

    #[test]
    fn zero_block_is_biased() {
        let (_, _, m) = example2();
        let r = check_unbiasedness(&m, &[1, 2, 3], &DMatrix::zeros(3, 8), 0.5).unwrap();
        assert!(!r.passed);
        assert_eq!(r.residuals, vec![1.0; 3]);
    }

    #[test]
    fn l4_variances() {
        let v = variance_sum(&l4_block(), 1.0).unwrap();
        assert_eq!(v.per_parameter, vec![0.25; 3]);
        assert_eq!(v.total, 0.75);
        assert_eq!(variance_sum(&DMatrix::zeros(3, 8), 1.0).unwrap().total, 0.0);
        assert!(variance_sum(&l4_block(), 0.0).is_err());
    }

    #[test]
    fn least_squares_on_l4_support_is_the_block() {
        let (_, _, m) = example2();
        let b = min_norm_least_squares(&m, &[0, 3, 5, 6], &[1, 2, 3]).unwrap();
        assert!((b - l4_block()).amax() < 1e-15);
    }

    #[test]
    fn least_squares_on_full_factorial() {
        let (_, _, m) = example2();
        let b = min_norm_least_squares(&m, &(0..8).collect::<Vec<_>>(), &[1, 2, 3]).unwrap();
        assert!(b.iter().all(|x| (x.abs() - 0.125).abs() < 1e-15));
        assert!((variance_sum(&b, 1.0).unwrap().total - 0.375).abs() < 1e-15);
    }

    #[test]
    fn least_squares_identity() {
        let m = ModelMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        let b = min_norm_least_squares(&m, &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert!((b - DMatrix::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn infeasible_support_names_the_target() {
        let (_, _, m) = example2();
        // runs 1 and 2 share a1 = a2 = -1, so neither main effect is estimable
        let err = min_norm_least_squares(&m, &[0, 1], &[1, 2, 3]).unwrap_err();
        assert!(
            matches!(err, DesignError::Infeasible { target: 1, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn repeated_support_index_is_rejected() {
        let (_, _, m) = example2();
        let err = min_norm_least_squares(&m, &[0, 3, 3, 5], &[1, 2, 3]).unwrap_err();
        assert!(matches!(err, DesignError::Specification(_)));
    }

    #[test]
    fn oracle_four_runs() {
        let (_, _, m) = example2();
        let r = brute_force_a_optimal(&m, &[1, 2, 3], 4).unwrap();
        assert_eq!(r.evaluated_count, 70);
        assert!((r.optimal_value.unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(r.optimal_supports, vec![vec![0, 3, 5, 6], vec![1, 2, 4, 7]]);
    }

    #[test]
    fn oracle_three_runs_and_full() {
        let (_, _, m) = example2();
        // three runs cannot separate the intercept from three main effects
        let r = brute_force_a_optimal(&m, &[1, 2, 3], 3).unwrap();
        assert_eq!((r.evaluated_count, r.feasible_count), (56, 0));
        assert_eq!(r.optimal_value, None);
        assert!(r.optimal_supports.is_empty());
        let r = brute_force_a_optimal(&m, &[1, 2, 3], 8).unwrap();
        assert!((r.optimal_value.unwrap() - 0.375).abs() < 1e-12);
    }

    #[test]
    fn oracle_guard() {
        let m = ModelMatrix::from_matrix(DMatrix::from_element(1, 60, 1.0)).unwrap();
        assert!(matches!(
            brute_force_a_optimal(&m, &[0], 30),
            Err(DesignError::SizeGuard { .. })
        ));
    }

    #[test]
    fn strength_of_l4() {
        let levels = vec![vec![-1.0, 1.0]; 3];
        assert!(oa_strength_check(&table1(), &levels, 2).unwrap());
        assert!(!oa_strength_check(&table1(), &levels, 3).unwrap());
        let repeated = DMatrix::from_element(3, 4, 1.0);
        assert!(!oa_strength_check(&repeated, &levels, 1).unwrap());
        assert!(oa_strength_check(&repeated, &levels, 0).unwrap());
        assert!(oa_strength_check(&table1(), &levels, 4).is_err());
    }

    #[test]
    fn equivalence_of_l4_and_its_mirror() {
        let mirror = -table1();
        assert!(design_equivalent(&table1(), &mirror).equivalent);
        assert!(design_equivalent(&table1(), &table1()).equivalent);
        let repeated = DMatrix::from_columns(&[
            DVector::from_element(3, 1.0),
            DVector::from_element(3, 1.0),
            DVector::from_vec(vec![-1.0, -1.0, 1.0]),
            DVector::from_vec(vec![1.0, -1.0, -1.0]),
        ]);
        let e = design_equivalent(&table1(), &repeated);
        assert!(!e.equivalent && e.reason.is_none());
        let e = design_equivalent(&table1(), &DMatrix::zeros(3, 5));
        assert!(!e.equivalent && e.reason.is_some());
        let three = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 2.0, 0.0]);
        assert!(design_equivalent(&three, &three).reason.is_some());
    }

    #[test]
    fn equivalence_under_permutations_and_relabeling() {
        // permute rows and runs, flip the middle row and relabel the levels
        let t = table1();
        let d = DMatrix::from_fn(3, 4, |r, n| {
            let x = t[([2, 1, 0][r], [3, 0, 2, 1][n])];
            let x = if r == 1 { -x } else { x };
            if x > 0.0 {
                5.0
            } else {
                2.0
            }
        });
        assert!(design_equivalent(&t, &d).equivalent);
    }

    #[test]
    fn monte_carlo_on_l4() {
        let (_, _, m) = example2();
        let r = monte_carlo_estimator_check(
            &m,
            &[1, 2, 3],
            &l4_block(),
            &[0.0, 1.0, 2.0, 3.0],
            1.0,
            100_000,
            7,
        )
        .unwrap();
        assert!(r.passed, "{r:?}");
        let noiseless = monte_carlo_estimator_check(
            &m,
            &[1, 2, 3],
            &l4_block(),
            &[0.5, 1.0, 2.0, 3.0],
            0.0,
            100,
            7,
        )
        .unwrap();
        for p in &noiseless.parameters {
            assert_eq!(p.empirical_mean, p.expected_mean);
            assert_eq!(p.empirical_variance, 0.0);
        }
        assert!(noiseless.passed);
    }

    #[test]
    fn monte_carlo_rejects_biased_estimators() {
        let (_, _, m) = example2();
        let err = monte_carlo_estimator_check(
            &m,
            &[1, 2, 3],
            &DMatrix::zeros(3, 8),
            &[0.0; 4],
            1.0,
            10,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, DesignError::Biased { target: 1, .. }));
    }

    #[test]
    fn design_matrix_records_the_runs() {
        let (spec, c, _) = example2();
        let d = DesignMatrix::from_coefficients(&c, &l4_block(), &[0, 3, 5, 6]).unwrap();
        assert_eq!(d.run_count(), 4);
        assert_eq!(d.variances, vec![0.25; 3]);
        assert_eq!(d.points.column(1), c.points().column(3));
        assert_eq!(d.term_rows(&spec), d.points);
    }
}
