//! Group-lasso solvers for design selection.
//!
//! The coefficient block `B` has one row per target parameter and one column
//! per candidate. Column `g` is the group attached to candidate `g`; when it
//! vanishes the candidate drops out of the design.
//!
//! Two formulations are supported:
//!
//! * constrained: `min sum_j |b_j|^2 + sum_g lambda_g |B_g|` subject to
//!   `M b_j = e_j` for every target `j` (unbiased estimators),
//! * relaxed: the equality constraints replaced by `kappa_j |M b_j - e_j|^2`.

mod constrained;
mod prox;
mod relaxed;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::ModelMatrix;
use crate::error::{DesignError, Result};
use crate::linalg;

pub use constrained::solve_constrained;
pub use prox::group_soft_threshold;
pub use relaxed::solve_relaxed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Initialization {
    /// Start from the minimum-norm unbiased estimators (constrained) or zero (relaxed).
    #[default]
    MinimumNorm,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub max_iterations: usize,
    pub support_threshold: f64,
    /// Initial splitting step of the constrained solver; adapted during the run.
    pub penalty_parameter: f64,
    pub initialization: Initialization,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            primal_tol: 1e-8,
            dual_tol: 1e-8,
            max_iterations: 200_000,
            support_threshold: 1e-6,
            penalty_parameter: 1.0,
            initialization: Initialization::MinimumNorm,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.primal_tol) || !positive(self.dual_tol) {
            return Err(DesignError::spec("solver tolerances must be positive"));
        }
        if !positive(self.penalty_parameter) {
            return Err(DesignError::spec("penalty parameter must be positive"));
        }
        if !(self.support_threshold >= 0.0) {
            return Err(DesignError::spec("support threshold must be non-negative"));
        }
        if self.max_iterations == 0 {
            return Err(DesignError::spec("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formulation {
    Constrained,
    /// One penalty weight per target, in target order.
    Relaxed {
        kappas: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLassoProblem {
    model: ModelMatrix,
    targets: Vec<usize>,
    lambdas: Vec<f64>,
    formulation: Formulation,
    options: SolverOptions,
}

impl GroupLassoProblem {
    pub fn new(
        model: ModelMatrix,
        targets: Vec<usize>,
        lambdas: Vec<f64>,
        formulation: Formulation,
        options: SolverOptions,
    ) -> Result<Self> {
        if lambdas.len() != model.candidate_count() {
            return Err(DesignError::spec(format!(
                "{} penalty weights for {} candidates",
                lambdas.len(),
                model.candidate_count()
            )));
        }
        if lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(DesignError::spec(
                "penalty weights must be finite and non-negative",
            ));
        }
        if targets.is_empty() {
            return Err(DesignError::spec("no target parameters"));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= model.term_count()) {
            return Err(DesignError::spec(format!("target {t} is not a model term")));
        }
        if let Formulation::Relaxed { kappas } = &formulation {
            if kappas.len() != targets.len() {
                return Err(DesignError::spec(format!(
                    "{} kappa values for {} targets",
                    kappas.len(),
                    targets.len()
                )));
            }
            if kappas.iter().any(|&k| !(k >= 0.0 && k.is_finite())) {
                return Err(DesignError::spec(
                    "kappa values must be finite and non-negative",
                ));
            }
        }
        options.validate()?;
        Ok(GroupLassoProblem {
            model,
            targets,
            lambdas,
            formulation,
            options,
        })
    }

    pub fn constrained(model: ModelMatrix, targets: Vec<usize>, lambdas: Vec<f64>) -> Result<Self> {
        Self::new(
            model,
            targets,
            lambdas,
            Formulation::Constrained,
            SolverOptions::default(),
        )
    }

    pub fn relaxed(
        model: ModelMatrix,
        targets: Vec<usize>,
        lambdas: Vec<f64>,
        kappas: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            model,
            targets,
            lambdas,
            Formulation::Relaxed { kappas },
            SolverOptions::default(),
        )
    }

    pub fn with_options(mut self, options: SolverOptions) -> Result<Self> {
        options.validate()?;
        self.options = options;
        Ok(self)
    }

    pub fn model(&self) -> &ModelMatrix {
        &self.model
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn formulation(&self) -> &Formulation {
        &self.formulation
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub(crate) fn target_vector(&self, row: usize) -> DVector<f64> {
        linalg::unit(self.model.term_count(), self.targets[row])
    }

    fn shape(&self) -> (usize, usize) {
        (self.targets.len(), self.model.candidate_count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIterations,
}

/// Optimality residuals of a coefficient block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    /// Largest stationarity residual over groups with a nonzero block.
    pub active_residual: f64,
    /// Largest amount by which a zero group's dual block exceeds its weight.
    pub inactive_excess: f64,
}

impl KktCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.active_residual <= tol && self.inactive_excess <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// |J| x G; row `j` holds the estimator weights of target `j`.
    pub coefficients: DMatrix<f64>,
    pub group_norms: Vec<f64>,
    pub support: Vec<usize>,
    pub objective: f64,
    /// `max_j |M b_j - e_j|_2`.
    pub constraint_residual: f64,
    pub iterations: usize,
    pub status: Status,
    pub certificate: KktCertificate,
}

impl Solution {
    pub(crate) fn assemble(
        problem: &GroupLassoProblem,
        coefficients: DMatrix<f64>,
        iterations: usize,
        status: Status,
        certificate: KktCertificate,
    ) -> Self {
        let group_norms = group_norms(&coefficients);
        let support = support_of(&group_norms, problem.options.support_threshold);
        Solution {
            objective: objective_value(problem, &coefficients),
            constraint_residual: constraint_residual(problem, &coefficients),
            coefficients,
            group_norms,
            support,
            iterations,
            status,
            certificate,
        }
    }
}

/// Dispatches on the problem's formulation.
pub fn solve(problem: &GroupLassoProblem) -> Result<Solution> {
    match problem.formulation {
        Formulation::Constrained => solve_constrained(problem),
        Formulation::Relaxed { .. } => solve_relaxed(problem),
    }
}

pub fn group_norms(b: &DMatrix<f64>) -> Vec<f64> {
    b.column_iter().map(|c| c.norm()).collect()
}

fn support_of(norms: &[f64], threshold: f64) -> Vec<usize> {
    norms
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > threshold)
        .map(|(g, _)| g)
        .collect()
}

/// Candidates whose group norm exceeds `threshold`.
pub fn extract_support(solution: &Solution, threshold: f64) -> Vec<usize> {
    support_of(&solution.group_norms, threshold)
}

/// `max_j |M b_j - e_j|_2`.
pub fn constraint_residual(problem: &GroupLassoProblem, b: &DMatrix<f64>) -> f64 {
    let m = problem.model.values();
    (0..problem.targets.len())
        .map(|j| (m * b.row(j).transpose() - problem.target_vector(j)).norm())
        .fold(0.0, f64::max)
}

/// Objective of the problem's formulation at `b`; feasibility is not part of the constrained value.
pub fn objective_value(problem: &GroupLassoProblem, b: &DMatrix<f64>) -> f64 {
    assert_eq!(
        b.shape(),
        problem.shape(),
        "coefficient block has the wrong shape"
    );
    let mut value = b.norm_squared();
    for (g, col) in b.column_iter().enumerate() {
        value += problem.lambdas[g] * col.norm();
    }
    if let Formulation::Relaxed { kappas } = &problem.formulation {
        let m = problem.model.values();
        for (j, &kappa) in kappas.iter().enumerate() {
            value += kappa * (m * b.row(j).transpose() - problem.target_vector(j)).norm_squared();
        }
    }
    value
}

/// Gradient of the smooth part of the objective, |J| x G.
pub(crate) fn smooth_gradient(problem: &GroupLassoProblem, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut grad = b * 2.0;
    if let Formulation::Relaxed { kappas } = &problem.formulation {
        let m = problem.model.values();
        for (j, &kappa) in kappas.iter().enumerate() {
            let r = m * b.row(j).transpose() - problem.target_vector(j);
            let gj = (m.transpose() * r) * (2.0 * kappa);
            let mut row = grad.row_mut(j);
            row += gj.transpose();
        }
    }
    grad
}

/// Stationarity residuals of `b`.
///
/// `grad` is the gradient of every smooth term, including any constraint
/// multipliers. A nonzero group must satisfy `grad_g + lambda_g b_g/|b_g| = 0`
/// and a zero group `|grad_g| <= lambda_g`.
pub(crate) fn certificate_from_gradient(
    lambdas: &[f64],
    b: &DMatrix<f64>,
    grad: &DMatrix<f64>,
) -> KktCertificate {
    let mut active_residual: f64 = 0.0;
    let mut inactive_excess: f64 = 0.0;
    for g in 0..b.ncols() {
        let col = b.column(g);
        let norm = col.norm();
        if norm > 0.0 {
            let r = grad.column(g) + col * (lambdas[g] / norm);
            active_residual = active_residual.max(r.norm());
        } else {
            inactive_excess = inactive_excess.max(grad.column(g).norm() - lambdas[g]);
        }
    }
    KktCertificate {
        active_residual,
        inactive_excess: inactive_excess.max(0.0),
    }
}

/// Stationarity certificate for the constrained problem.
///
/// The constraint multipliers are fitted by least squares on the nonzero
/// groups. Any freedom left in them is spent matching `dual_hint` (the
/// subgradient estimate of the splitting solver) on the zero groups.
pub fn constrained_certificate(
    problem: &GroupLassoProblem,
    b: &DMatrix<f64>,
    dual_hint: Option<&DMatrix<f64>>,
) -> KktCertificate {
    certificate_from_gradient(
        &problem.lambdas,
        b,
        &constrained_gradient(problem, b, dual_hint),
    )
}

/// Gradient of the smooth objective plus the fitted constraint term `M^T nu_j`.
pub(crate) fn constrained_gradient(
    problem: &GroupLassoProblem,
    b: &DMatrix<f64>,
    dual_hint: Option<&DMatrix<f64>>,
) -> DMatrix<f64> {
    let m = problem.model.values();
    let (rows, g_count) = problem.shape();
    let active: Vec<usize> = (0..g_count).filter(|&g| b.column(g).norm() > 0.0).collect();
    let inactive: Vec<usize> = (0..g_count)
        .filter(|&g| b.column(g).norm() == 0.0)
        .collect();
    let m_active_t = m.select_columns(&active).transpose();
    let pinv = linalg::pseudo_inverse(&m_active_t);
    let free = linalg::null_space(&m_active_t);
    let m_inactive_t = m.select_columns(&inactive).transpose();

    let mut grad = b * 2.0;
    for j in 0..rows {
        // -(M^T nu)_g on active groups equals 2 b_jg + lambda_g b_jg / |b_g|
        let target = DVector::from_iterator(
            active.len(),
            active.iter().map(|&g| {
                let norm = b.column(g).norm();
                -(2.0 * b[(j, g)] + problem.lambdas[g] * b[(j, g)] / norm)
            }),
        );
        let mut nu = &pinv * &target;
        if free.ncols() > 0 && !inactive.is_empty() {
            let hint = DVector::from_iterator(
                inactive.len(),
                inactive
                    .iter()
                    .map(|&g| dual_hint.map_or(0.0, |y| y[(j, g)])),
            );
            // minimize |-(M_Z^T (nu + N c)) - hint|
            let a = &m_inactive_t * &free;
            let rhs = -(&hint + &m_inactive_t * &nu);
            let c = linalg::pseudo_inverse(&a) * rhs;
            nu += &free * c;
        }
        let mt_nu = m.transpose() * nu;
        let mut row = grad.row_mut(j);
        row += mt_nu.transpose();
    }
    grad
}

/// Stationarity certificate for the relaxed problem.
pub fn relaxed_certificate(problem: &GroupLassoProblem, b: &DMatrix<f64>) -> KktCertificate {
    certificate_from_gradient(&problem.lambdas, b, &smooth_gradient(problem, b))
}

/// Newton decrement, relative to the objective, below which line searches
/// can no longer see a decrease.
pub(crate) const NEWTON_FLOOR: f64 = 1e-12;

/// Relative step size at which Newton stops.
pub(crate) const STEP_RTOL: f64 = 1e-15;

/// True when the step would carry a penalized group through zero.
pub(crate) fn crosses_zero(bs: &DMatrix<f64>, delta: &DMatrix<f64>, weights: &[f64]) -> bool {
    (0..bs.ncols())
        .any(|s| weights[s] > 0.0 && bs.column(s).dot(&(bs.column(s) + delta.column(s))) <= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{
        build_model_matrix, enumerate_full_factorial, main_effect_terms, two_level_factors,
        ModelSpec,
    };

    pub(crate) fn three_factor_model() -> ModelMatrix {
        let spec =
            ModelSpec::new(two_level_factors(3), main_effect_terms(3), vec![1, 2, 3]).unwrap();
        build_model_matrix(&enumerate_full_factorial(spec.factors()), &spec).unwrap()
    }

    // rows ordered as the estimators of a1, a2, a3
    #[rustfmt::skip]
    fn l4_block() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 8, &[
            -1., 0., 0., -1., 0., 1., 1., 0.,
            -1., 0., 0., 1., 0., -1., 1., 0.,
            -1., 0., 0., 1., 0., 1., -1., 0.,
        ]) / 4.0
    }

    #[rustfmt::skip]
    fn mirrored_l4_block() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 8, &[
            0., -1., -1., 0., 1., 0., 0., 1.,
            0., -1., 1., 0., -1., 0., 0., 1.,
            0., 1., -1., 0., -1., 0., 0., 1.,
        ]) / 4.0
    }

    #[test]
    fn objective_at_zero_relaxed() {
        let p = GroupLassoProblem::relaxed(
            three_factor_model(),
            vec![1, 2, 3],
            vec![0.5; 8],
            vec![1.0; 3],
        )
        .unwrap();
        assert_eq!(objective_value(&p, &DMatrix::zeros(3, 8)), 3.0);
    }

    #[test]
    fn objective_of_l4_blocks() {
        let lambda = 1.7;
        let p =
            GroupLassoProblem::constrained(three_factor_model(), vec![1, 2, 3], vec![lambda; 8])
                .unwrap();
        let a = objective_value(&p, &l4_block());
        let b = objective_value(&p, &mirrored_l4_block());
        assert!((a - (0.75 + lambda * 3f64.sqrt())).abs() < 1e-12);
        assert!((a - b).abs() < 1e-12);
        assert!(constraint_residual(&p, &l4_block()) < 1e-15);
        assert!(constraint_residual(&p, &mirrored_l4_block()) < 1e-15);
    }

    #[test]
    fn problem_validation() {
        let m = three_factor_model();
        assert!(GroupLassoProblem::constrained(m.clone(), vec![1], vec![1.0; 7]).is_err());
        assert!(GroupLassoProblem::constrained(m.clone(), vec![1], vec![-1.0; 8]).is_err());
        assert!(GroupLassoProblem::constrained(m.clone(), vec![9], vec![1.0; 8]).is_err());
        assert!(
            GroupLassoProblem::relaxed(m.clone(), vec![1, 2], vec![1.0; 8], vec![1.0]).is_err()
        );
        let bad = SolverOptions {
            primal_tol: 0.0,
            ..SolverOptions::default()
        };
        assert!(GroupLassoProblem::constrained(m, vec![1], vec![1.0; 8])
            .unwrap()
            .with_options(bad)
            .is_err());
    }

    #[test]
    fn support_extraction() {
        let p = GroupLassoProblem::constrained(three_factor_model(), vec![1, 2, 3], vec![0.0; 8])
            .unwrap();
        let zero = Solution::assemble(
            &p,
            DMatrix::zeros(3, 8),
            0,
            Status::Converged,
            KktCertificate {
                active_residual: 0.0,
                inactive_excess: 0.0,
            },
        );
        assert!(extract_support(&zero, 1e-6).is_empty());
        let l4 = Solution::assemble(&p, l4_block(), 0, Status::Converged, zero.certificate);
        assert_eq!(extract_support(&l4, 1e-6), vec![0, 3, 5, 6]);
    }
}
