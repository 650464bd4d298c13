//! Relaxed formulation by cyclic block coordinate descent over candidate groups.

use nalgebra::{DMatrix, DVector};

use super::{
    crosses_zero, group_soft_threshold, objective_value, relaxed_certificate, Formulation,
    GroupLassoProblem, Solution, Status, NEWTON_FLOOR, STEP_RTOL,
};
use crate::error::Result;

/// Sweeps between Newton refinements on the current support.
const POLISH_EVERY: usize = 50;

/// Minimizes `sum_j (a_j x_j^2 - 2 d_j x_j) + lambda |x|` for per-coordinate curvatures `a`.
///
/// For a nonzero minimizer with norm `s`, `x_j = d_j s / (a_j s + lambda/2)`,
/// so `s` is the root of `sum_j d_j^2 / (a_j s + lambda/2)^2 = 1`, found by
/// Newton's method safeguarded with bisection.
pub(crate) fn weighted_group_update(d: &DVector<f64>, a: &[f64], lambda: f64) -> DVector<f64> {
    let dn = d.norm();
    if dn == 0.0 || 2.0 * dn <= lambda {
        return DVector::zeros(d.len());
    }
    if lambda == 0.0 {
        return DVector::from_iterator(d.len(), d.iter().zip(a).map(|(di, ai)| di / ai));
    }
    let half = 0.5 * lambda;
    let a_min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let a_max = a.iter().cloned().fold(0.0, f64::max);
    let phi = |s: f64| -> (f64, f64) {
        let mut value = -1.0;
        let mut slope = 0.0;
        for (di, ai) in d.iter().zip(a) {
            let den = ai * s + half;
            value += di * di / (den * den);
            slope -= 2.0 * di * di * ai / (den * den * den);
        }
        (value, slope)
    };
    let mut lo = ((dn - half) / a_max).max(0.0);
    let mut hi = (dn - half) / a_min;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (value, slope) = phi(s);
        if value > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
        let newton = s - value / slope;
        s = if slope < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (s - newton).abs() <= 1e-12 * s && value.abs() <= 1e-15 {
            break;
        }
    }
    DVector::from_iterator(
        d.len(),
        d.iter().zip(a).map(|(di, ai)| di * s / (ai * s + half)),
    )
}

pub fn solve_relaxed(problem: &GroupLassoProblem) -> Result<Solution> {
    let kappas = match problem.formulation() {
        Formulation::Relaxed { kappas } => kappas.clone(),
        Formulation::Constrained => {
            return Err(crate::DesignError::spec(
                "relaxed solver called on a constrained problem",
            ))
        }
    };
    let m = problem.model().values();
    let lambdas = problem.lambdas();
    let opts = problem.options();
    let (rows, g_count) = (problem.targets().len(), m.ncols());
    let uniform = kappas.iter().all(|&k| k == kappas[0]);

    let column_sq: Vec<f64> = m.column_iter().map(|c| c.norm_squared()).collect();
    let mut b = DMatrix::zeros(rows, g_count);
    // residuals M b_j - e_j, one column per target
    let mut residual = DMatrix::from_fn(m.nrows(), rows, |i, j| -problem.target_vector(j)[i]);

    let mut status = Status::MaxIterations;
    let mut sweeps = 0;
    while sweeps < opts.max_iterations {
        sweeps += 1;
        let mut largest_update: f64 = 0.0;
        for g in 0..g_count {
            let mg = m.column(g);
            let d = DVector::from_fn(rows, |j, _| {
                kappas[j] * (b[(j, g)] * column_sq[g] - mg.dot(&residual.column(j)))
            });
            let x = if uniform {
                group_soft_threshold(&d, 1.0 + kappas[0] * column_sq[g], lambdas[g])
            } else {
                let a: Vec<f64> = kappas.iter().map(|k| 1.0 + k * column_sq[g]).collect();
                weighted_group_update(&d, &a, lambdas[g])
            };
            let delta = &x - b.column(g);
            let step = delta.norm();
            if step > 0.0 {
                for j in 0..rows {
                    residual.column_mut(j).axpy(delta[j], &mg, 1.0);
                }
                b.set_column(g, &x);
            }
            largest_update = largest_update.max(step);
        }
        if largest_update <= opts.primal_tol {
            status = Status::Converged;
            break;
        }
        // large kappa makes the sweeps contract slowly; a Newton step on the
        // support jumps ahead and the next sweep checks the result
        if sweeps % POLISH_EVERY == 0 {
            if let Some(polished) = polish(problem, &kappas, &b) {
                b = polished;
                for j in 0..rows {
                    let r = m * b.row(j).transpose() - problem.target_vector(j);
                    residual.set_column(j, &r);
                }
            }
        }
    }
    let certificate = relaxed_certificate(problem, &b);
    Ok(Solution::assemble(problem, b, sweeps, status, certificate))
}

/// Newton refinement of `start` with an active set.
///
/// Newton's method runs on the nonzero groups, where the objective is smooth.
/// A stall means a penalized group is heading to the kink at zero; the
/// smallest one is dropped and Newton restarts. Returns `None` unless the
/// result is stationary on its support and no worse than `start`.
fn polish(
    problem: &GroupLassoProblem,
    kappas: &[f64],
    start: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let start_value = objective_value(problem, start);
    let mut support: Vec<usize> = (0..start.ncols())
        .filter(|&g| start.column(g).norm() > 0.0)
        .collect();
    let mut base = start.clone();
    while !support.is_empty() {
        match newton_on_support(problem, kappas, &support, &base)? {
            Ok(b) => return (objective_value(problem, &b) <= start_value).then_some(b),
            Err(stalled) => {
                let drop = support
                    .iter()
                    .copied()
                    .filter(|&g| problem.lambdas()[g] > 0.0)
                    .min_by(|&x, &y| {
                        stalled
                            .column(x)
                            .norm()
                            .total_cmp(&stalled.column(y).norm())
                    })?;
                support.retain(|&g| g != drop);
                base = stalled;
                base.column_mut(drop).fill(0.0);
            }
        }
    }
    None
}

/// Newton's method over the groups in `support`; the rest stay zero.
///
/// `Ok` holds a stationary point; `Err` holds the iterate where the line
/// search stalled. `None` means the Hessian was not positive definite.
fn newton_on_support(
    problem: &GroupLassoProblem,
    kappas: &[f64],
    support: &[usize],
    start: &DMatrix<f64>,
) -> Option<std::result::Result<DMatrix<f64>, DMatrix<f64>>> {
    const MAX_STEPS: usize = 50;
    let (rows, g_count) = start.shape();
    let m_s = problem.model().values().select_columns(support);
    let gram = m_s.transpose() * &m_s;
    let weights: Vec<f64> = support.iter().map(|&g| problem.lambdas()[g]).collect();
    let targets: Vec<DVector<f64>> = (0..rows).map(|j| problem.target_vector(j)).collect();
    let (n_s, dim) = (support.len(), rows * support.len());
    let embed = |bs: &DMatrix<f64>| {
        let mut b = DMatrix::zeros(rows, g_count);
        for (s, &g) in support.iter().enumerate() {
            b.set_column(g, &bs.column(s));
        }
        b
    };
    let mut bs = start.select_columns(support);
    let mut value = objective_value(problem, &embed(&bs));
    for _ in 0..MAX_STEPS {
        let norms: Vec<f64> = bs.column_iter().map(|c| c.norm()).collect();
        if (0..n_s).any(|s| weights[s] > 0.0 && norms[s] == 0.0) {
            return Some(Err(embed(&bs)));
        }
        // gradient and Hessian over vec(B_S), index s * rows + j
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for j in 0..rows {
            let fit = (m_s.transpose() * (&m_s * bs.row(j).transpose() - &targets[j]))
                * (2.0 * kappas[j]);
            for s in 0..n_s {
                grad[s * rows + j] = 2.0 * bs[(j, s)] + fit[s];
                for t in 0..n_s {
                    hess[(s * rows + j, t * rows + j)] = 2.0 * kappas[j] * gram[(s, t)];
                }
                hess[(s * rows + j, s * rows + j)] += 2.0;
            }
        }
        for s in 0..n_s {
            if weights[s] == 0.0 {
                continue;
            }
            let (n, l) = (norms[s], weights[s]);
            for i in 0..rows {
                grad[s * rows + i] += l * bs[(i, s)] / n;
                for j in 0..rows {
                    let mut h = -l * bs[(i, s)] * bs[(j, s)] / (n * n * n);
                    if i == j {
                        h += l / n;
                    }
                    hess[(s * rows + i, s * rows + j)] += h;
                }
            }
        }
        let step = hess.cholesky()?.solve(&(-&grad));
        let decrement = -grad.dot(&step);
        let delta = DMatrix::from_fn(rows, n_s, |j, s| step[s * rows + j]);
        if !(decrement > NEWTON_FLOOR * (1.0 + value.abs())) {
            // below rounding in the objective: full steps, stopped by step size
            if crosses_zero(&bs, &delta, &weights) {
                return Some(Err(embed(&bs)));
            }
            bs += &delta;
            value = objective_value(problem, &embed(&bs));
            if delta.amax() <= STEP_RTOL * bs.amax() {
                return Some(Ok(embed(&bs)));
            }
            continue;
        }
        let mut alpha = 1.0;
        loop {
            let trial = &bs + &delta * alpha;
            let trial_value = objective_value(problem, &embed(&trial));
            if trial_value <= value - 1e-4 * alpha * decrement {
                bs = trial;
                value = trial_value;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Some(Err(embed(&bs)));
            }
        }
    }
    Some(Err(embed(&bs)))
}

#[cfg(test)]
mod tests {
    use super::super::tests::three_factor_model;
    use super::super::{objective_value, SolverOptions};
    use super::*;

    #[test]
    fn zero_kappa_gives_zero() {
        let p = GroupLassoProblem::relaxed(
            three_factor_model(),
            vec![1, 2, 3],
            vec![1.0; 8],
            vec![0.0; 3],
        )
        .unwrap();
        let s = solve_relaxed(&p).unwrap();
        assert_eq!(s.coefficients, DMatrix::zeros(3, 8));
        assert_eq!(s.status, Status::Converged);
    }

    #[test]
    fn large_weights_kill_every_group() {
        // at B = 0, |d_g| = kappa |m_g . e_j| over j, i.e. kappa * sqrt(3)
        let kappa = 2.0;
        let lambdas = vec![2.0 * kappa * 3f64.sqrt() + 1e-9; 8];
        let p = GroupLassoProblem::relaxed(
            three_factor_model(),
            vec![1, 2, 3],
            lambdas,
            vec![kappa; 3],
        )
        .unwrap();
        let s = solve_relaxed(&p).unwrap();
        assert!(s.support.is_empty());
        assert_eq!(s.iterations, 1);
    }

    #[test]
    fn weighted_update_matches_closed_form_for_equal_curvature() {
        let d = DVector::from_vec(vec![1.5, -0.5, 2.0]);
        for lambda in [0.0, 0.3, 1.0, 4.0, 6.0] {
            let a = weighted_group_update(&d, &[3.0; 3], lambda);
            let b = group_soft_threshold(&d, 3.0, lambda);
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn weighted_update_is_stationary() {
        let d = DVector::from_vec(vec![2.0, -1.0, 0.5]);
        let a = [1.0, 10.0, 100.0];
        let lambda = 0.7;
        let x = weighted_group_update(&d, &a, lambda);
        let n = x.norm();
        for j in 0..3 {
            let r = 2.0 * a[j] * x[j] - 2.0 * d[j] + lambda * x[j] / n;
            assert!(r.abs() < 1e-10, "{r}");
        }
    }

    #[test]
    fn nonuniform_kappa_is_a_minimizer() {
        let lambdas = vec![0., 10., 10., 0., 10., 0., 0., 10.];
        let p = GroupLassoProblem::relaxed(
            three_factor_model(),
            vec![1, 2, 3],
            lambdas,
            vec![1.0, 5.0, 25.0],
        )
        .unwrap();
        let s = solve_relaxed(&p).unwrap();
        assert_eq!(s.status, Status::Converged);
        assert!(s.certificate.holds(1e-6), "{:?}", s.certificate);
        // small perturbations never improve the objective
        let base = objective_value(&p, &s.coefficients);
        for k in 0..24 {
            let mut b = s.coefficients.clone();
            b[(k % 3, k / 3)] += 1e-4;
            assert!(objective_value(&p, &b) >= base - 1e-12);
        }
    }

    #[test]
    fn kappa_increase_tightens_the_constraint() {
        let lambdas = vec![0., 10., 10., 0., 10., 0., 0., 10.];
        let mut last = f64::INFINITY;
        for kappa in [1e2, 1e3, 1e4] {
            let p = GroupLassoProblem::relaxed(
                three_factor_model(),
                vec![1, 2, 3],
                lambdas.clone(),
                vec![kappa; 3],
            )
            .unwrap()
            .with_options(SolverOptions::default())
            .unwrap();
            let s = solve_relaxed(&p).unwrap();
            assert!(s.constraint_residual <= last);
            last = s.constraint_residual;
        }
    }
}
