//! Constrained formulation: operator splitting plus a Newton polish on the support.
//!
//! The splitting alternates between
//!
//! 1. `x_j = argmin |x|^2 + rho/2 |x - (z_j - u_j)|^2` subject to `M x = e_j`,
//!    which is an affine projection through a pseudo-inverse of `M` computed
//!    once and reused for every target and iteration,
//! 2. `z_g = prox_{lambda_g/rho |.|}(x_g + u_g)`, an exact group soft-threshold,
//!
//! followed by the scaled dual update `u += x - z`. Once the iterates settle,
//! the nonzero groups of `z` fix a support on which the objective is smooth,
//! and a feasible-start Newton method finishes the solve to machine precision.
//! The result is accepted only when its KKT certificate holds.

use nalgebra::{DMatrix, DVector};

use super::{
    constrained_certificate, constrained_gradient, crosses_zero, group_soft_threshold,
    GroupLassoProblem, Initialization, Solution, Status, NEWTON_FLOOR, STEP_RTOL,
};
use crate::error::{DesignError, Result};
use crate::linalg;

/// Tolerance on `|M P e_j - e_j|` below which target `j` counts as estimable.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Iterations between attempts to polish the splitting iterate.
const POLISH_EVERY: usize = 200;

/// Residual level at which polishing is first attempted.
const POLISH_START: f64 = 1e-4;

/// Relative group norm at which Newton treats a penalized group as vanished.
const COLLAPSE_RTOL: f64 = 1e-9;

const BALANCE_EVERY: usize = 10;
const BALANCE_RATIO: f64 = 10.0;

pub fn solve_constrained(problem: &GroupLassoProblem) -> Result<Solution> {
    let m = problem.model().values();
    let lambdas = problem.lambdas();
    let opts = problem.options();
    let (rows, g_count) = (problem.targets().len(), m.ncols());

    let projector = linalg::pseudo_inverse(m);
    let targets: Vec<DVector<f64>> = (0..rows).map(|j| problem.target_vector(j)).collect();
    let least_norm: Vec<DVector<f64>> = targets.iter().map(|e| &projector * e).collect();
    for (j, (e, x)) in targets.iter().zip(&least_norm).enumerate() {
        let residual = (m * x - e).norm();
        if residual > FEASIBILITY_TOL {
            return Err(DesignError::Infeasible {
                target: problem.targets()[j],
                residual,
            });
        }
    }

    let mut z = DMatrix::zeros(rows, g_count);
    if opts.initialization == Initialization::MinimumNorm {
        for (j, x) in least_norm.iter().enumerate() {
            z.set_row(j, &x.transpose());
        }
    }
    let mut u = DMatrix::zeros(rows, g_count);
    let mut x = z.clone();
    let mut rho = opts.penalty_parameter;
    let mut last_polish_support: Option<Vec<usize>> = None;

    for iteration in 1..=opts.max_iterations {
        // affine projection step
        let shrink = rho / (2.0 + rho);
        for j in 0..rows {
            let v = (z.row(j) - u.row(j)).transpose() * shrink;
            let correction = &projector * (m * &v - &targets[j]);
            x.set_row(j, &(v - correction).transpose());
        }
        // group soft-threshold step
        let z_old = z.clone();
        for g in 0..g_count {
            let w = x.column(g) + u.column(g);
            let zg = group_soft_threshold(&w.into_owned(), 1.0, 2.0 * lambdas[g] / rho);
            z.set_column(g, &zg);
        }
        u += &x - &z;

        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_old).norm();
        let settled = primal <= opts.primal_tol && dual <= opts.dual_tol;

        let checkpoint =
            iteration % POLISH_EVERY == 0 && primal <= POLISH_START && dual <= POLISH_START;
        if settled || checkpoint {
            let support: Vec<usize> = (0..g_count).filter(|&g| z.column(g).norm() > 0.0).collect();
            // a support that already failed is retried only at checkpoints
            if checkpoint || last_polish_support.as_ref() != Some(&support) {
                let hint = hint_of(&u, rho);
                if let Some(b) = polish(problem, &support, &z, &hint) {
                    let cert = constrained_certificate(problem, &b, Some(&hint));
                    let sol = Solution::assemble(problem, b, iteration, Status::Converged, cert);
                    if cert.holds(opts.dual_tol) && sol.constraint_residual <= opts.primal_tol {
                        return Ok(sol);
                    }
                }
                if let Some(b) = project_onto_support(problem, &z) {
                    let cert = constrained_certificate(problem, &b, Some(&hint));
                    let sol = Solution::assemble(problem, b, iteration, Status::Converged, cert);
                    if cert.holds(opts.dual_tol) && sol.constraint_residual <= opts.primal_tol {
                        return Ok(sol);
                    }
                }
                last_polish_support = Some(support);
            }
        }

        if iteration % BALANCE_EVERY == 0 {
            if primal > BALANCE_RATIO * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > BALANCE_RATIO * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }

    let b = project_onto_support(problem, &z).unwrap_or(x);
    let cert = constrained_certificate(problem, &b, Some(&hint_of(&u, rho)));
    Ok(Solution::assemble(
        problem,
        b,
        opts.max_iterations,
        Status::MaxIterations,
        cert,
    ))
}

fn hint_of(u: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    u * rho
}

/// Closest point to `z` that is feasible and vanishes off the nonzero groups of `z`.
fn project_onto_support(problem: &GroupLassoProblem, z: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let support: Vec<usize> = (0..z.ncols())
        .filter(|&g| z.column(g).norm() > 0.0)
        .collect();
    feasible_start(problem, &support, z)
}

fn feasible_start(
    problem: &GroupLassoProblem,
    support: &[usize],
    z: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    if support.is_empty() {
        return None;
    }
    let m = problem.model().values();
    let m_s = m.select_columns(support);
    let pinv = linalg::pseudo_inverse(&m_s);
    let mut b = DMatrix::zeros(z.nrows(), z.ncols());
    for j in 0..z.nrows() {
        let e = problem.target_vector(j);
        let zs = DVector::from_iterator(support.len(), support.iter().map(|&g| z[(j, g)]));
        let beta = &zs + &pinv * (&e - &m_s * &zs);
        if (&m_s * &beta - &e).norm() > FEASIBILITY_TOL {
            return None;
        }
        for (k, &g) in support.iter().enumerate() {
            b[(j, g)] = beta[k];
        }
    }
    Some(b)
}

/// Objective restricted to the support columns `bs` (|J| x |S|).
fn support_objective(bs: &DMatrix<f64>, weights: &[f64]) -> f64 {
    bs.norm_squared()
        + bs.column_iter()
            .zip(weights)
            .map(|(c, &l)| l * c.norm())
            .sum::<f64>()
}

enum NewtonOutcome {
    Done(DMatrix<f64>),
    /// A penalized group shrank to zero; the support is too large.
    Collapsed(usize),
    Failed,
}

/// Feasible-start Newton on the support, where every penalized group norm stays positive.
fn newton_on_support(
    problem: &GroupLassoProblem,
    support: &[usize],
    start: &DMatrix<f64>,
) -> NewtonOutcome {
    const MAX_STEPS: usize = 100;
    let rows = start.nrows();
    let m_s = problem.model().values().select_columns(support);
    let null = linalg::null_space(&m_s);
    let weights: Vec<f64> = support.iter().map(|&g| problem.lambdas()[g]).collect();
    let mut bs = start.select_columns(support);
    let k = null.ncols();
    if k == 0 {
        return NewtonOutcome::Done(start.clone());
    }
    let n_s = support.len();
    let dim = rows * n_s;
    // null-space coordinates: delta[j, s] = sum_c y[c * rows + j] * null[s, c]
    let mut t = DMatrix::zeros(dim, rows * k);
    for s in 0..n_s {
        for c in 0..k {
            for j in 0..rows {
                t[(s * rows + j, c * rows + j)] = null[(s, c)];
            }
        }
    }

    for _ in 0..MAX_STEPS {
        let norms: Vec<f64> = bs.column_iter().map(|c| c.norm()).collect();
        let scale = norms.iter().cloned().fold(0.0, f64::max);
        if let Some(s) = (0..n_s).find(|&s| weights[s] > 0.0 && norms[s] <= COLLAPSE_RTOL * scale) {
            return NewtonOutcome::Collapsed(support[s]);
        }
        // gradient and Hessian over vec(B_S), index s * rows + j
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for s in 0..n_s {
            let col = bs.column(s);
            let (n, l) = (norms[s], weights[s]);
            let curvature = if l > 0.0 { l / n } else { 0.0 };
            for j in 0..rows {
                grad[s * rows + j] = 2.0 * col[j] + curvature * col[j];
                for i in 0..rows {
                    let mut h = -curvature * col[i] * col[j] / (n * n);
                    if i == j {
                        h += 2.0 + curvature;
                    }
                    hess[(s * rows + i, s * rows + j)] = h;
                }
            }
        }
        let reduced_h = t.transpose() * &hess * &t;
        let reduced_g = t.transpose() * &grad;
        let Some(chol) = reduced_h.cholesky() else {
            return NewtonOutcome::Failed;
        };
        let step = &t * chol.solve(&(-&reduced_g));
        let decrement = -grad.dot(&step);
        let delta = DMatrix::from_fn(rows, n_s, |j, s| step[s * rows + j]);
        let f0 = support_objective(&bs, &weights);
        if !(decrement > NEWTON_FLOOR * (1.0 + f0.abs())) {
            // below rounding in the objective: full steps, stopped by step size
            if crosses_zero(&bs, &delta, &weights) {
                return stuck(&bs, &weights, support);
            }
            bs += &delta;
            if delta.amax() <= STEP_RTOL * bs.amax() {
                return NewtonOutcome::Done(embed(&bs, support, start.ncols()));
            }
            continue;
        }
        let mut alpha = 1.0;
        loop {
            let trial = &bs + &delta * alpha;
            if support_objective(&trial, &weights) <= f0 - 1e-4 * alpha * decrement {
                bs = trial;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return stuck(&bs, &weights, support);
            }
        }
    }
    stuck(&bs, &weights, support)
}

/// Newton stalls when a penalized group is heading to zero, where the
/// objective has a kink; the smallest such group is dropped.
fn stuck(bs: &DMatrix<f64>, weights: &[f64], support: &[usize]) -> NewtonOutcome {
    (0..support.len())
        .filter(|&s| weights[s] > 0.0)
        .min_by(|&a, &b| bs.column(a).norm().total_cmp(&bs.column(b).norm()))
        .map_or(NewtonOutcome::Failed, |s| {
            NewtonOutcome::Collapsed(support[s])
        })
}

/// Active-set refinement of a splitting iterate.
///
/// Newton runs on the nonzero groups of `z`. Groups that collapse are dropped
/// and zero groups whose dual block exceeds their weight are added back, until
/// the support is self-consistent.
fn polish(
    problem: &GroupLassoProblem,
    support: &[usize],
    z: &DMatrix<f64>,
    hint: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let g_count = z.ncols();
    let mut support = support.to_vec();
    let mut base = z.clone();
    for _ in 0..2 * g_count {
        let start = feasible_start(problem, &support, &base)?;
        match newton_on_support(problem, &support, &start) {
            NewtonOutcome::Failed => return None,
            NewtonOutcome::Collapsed(g) => {
                support.retain(|&s| s != g);
                base = start;
                base.column_mut(g).fill(0.0);
            }
            NewtonOutcome::Done(b) => {
                let grad = constrained_gradient(problem, &b, Some(hint));
                let worst = (0..g_count)
                    .filter(|g| !support.contains(g))
                    .map(|g| (g, grad.column(g).norm() - problem.lambdas()[g]))
                    .filter(|&(_, excess)| excess > problem.options().dual_tol)
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match worst {
                    None => return Some(b),
                    Some((g, _)) => {
                        // enter along the descent direction of the violating group
                        let dir = -grad.column(g);
                        let size = 1e-3 * b.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
                        base = b;
                        base.set_column(g, &(dir.normalize() * size));
                        support.push(g);
                        support.sort_unstable();
                    }
                }
            }
        }
    }
    None
}

fn embed(bs: &DMatrix<f64>, support: &[usize], g_count: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(bs.nrows(), g_count);
    for (s, &g) in support.iter().enumerate() {
        b.set_column(g, &bs.column(s));
    }
    b
}
