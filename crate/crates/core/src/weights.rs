//! Candidate penalty weights from greedy subspace growth.
//!
//! Starting from the first candidate, the subspace spanned by already chosen
//! model-matrix columns grows by one column per step: the candidate whose
//! column has the smallest projection onto the current subspace joins next.
//! Every candidate accumulates its squared projection norm over the steps,
//! so candidates that are nearly orthogonal to the growing subspace end up
//! with small penalties. This breaks the sign symmetry that otherwise keeps
//! the group lasso from returning a sparse design.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::ModelMatrix;
use crate::error::{DesignError, Result};

/// Relative tolerance below which an orthogonalized vector counts as dependent.
pub const BASIS_RTOL: f64 = 1e-10;

/// Relative tolerance for treating two projection norms as tied.
pub const TIE_RTOL: f64 = 1e-9;

/// Orthonormal basis grown by modified Gram-Schmidt with one re-orthogonalization pass.
#[derive(Debug, Clone, Default)]
pub struct OrthonormalBasis {
    vectors: Vec<DVector<f64>>,
    largest_norm: f64,
}

impl OrthonormalBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_vectors<'a>(vectors: impl IntoIterator<Item = &'a DVector<f64>>) -> Self {
        let mut basis = Self::new();
        for v in vectors {
            basis.push(v);
        }
        basis
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    /// Adds `v` to the span; returns false when `v` is numerically dependent.
    pub fn push(&mut self, v: &DVector<f64>) -> bool {
        self.largest_norm = self.largest_norm.max(v.norm());
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let norm = w.norm();
        if norm <= BASIS_RTOL * self.largest_norm || norm == 0.0 {
            return false;
        }
        self.vectors.push(w / norm);
        true
    }

    /// Squared norm of the orthogonal projection of `v` onto the span.
    pub fn projection_norm_sq(&self, v: &DVector<f64>) -> f64 {
        self.vectors.iter().map(|q| q.dot(v).powi(2)).sum()
    }

    /// Squared distance from `v` to the span.
    pub fn distance_sq(&self, v: &DVector<f64>) -> f64 {
        let mut r = v.clone();
        for q in &self.vectors {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
        r.norm_squared()
    }
}

/// Squared norm of the projection of `vector` onto `span(basis_vectors)`; 0 for an empty basis.
pub fn projection_norm_sq(vector: &DVector<f64>, basis_vectors: &[DVector<f64>]) -> f64 {
    OrthonormalBasis::from_vectors(basis_vectors).projection_norm_sq(vector)
}

/// How to choose among candidates tied for the smallest projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "policy", content = "seed")]
pub enum TieBreak {
    #[default]
    SmallestIndex,
    SeededRandom(u64),
}

/// Penalty weights together with the greedy selection that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTrace {
    /// One weight per candidate.
    pub lambdas: Vec<f64>,
    /// Candidates in the order they joined the subspace, starting with candidate 0.
    pub selection_order: Vec<usize>,
    /// G x |terms|; entry (g, t) is the contribution of step t to candidate g.
    pub l_matrix: DMatrix<f64>,
}

impl WeightTrace {
    /// Replays the greedy choice at every step from `l_matrix`, returning the
    /// steps whose selection was not an argmin of that step's values.
    pub fn non_argmin_steps(&self) -> Vec<usize> {
        let g_count = self.l_matrix.nrows();
        let scale = self.l_matrix.iter().cloned().fold(1.0, f64::max);
        let mut bad = Vec::new();
        for (t, &chosen) in self.selection_order.iter().enumerate().skip(1) {
            let step = t - 1;
            let earlier = &self.selection_order[..t];
            let min = (0..g_count)
                .filter(|g| !earlier.contains(g))
                .map(|g| self.l_matrix[(g, step)])
                .fold(f64::INFINITY, f64::min);
            if self.l_matrix[(chosen, step)] > min + TIE_RTOL * scale {
                bad.push(step);
            }
        }
        bad
    }
}

/// Runs the greedy subspace construction over the columns of `m`.
///
/// Step `t` (0-based, `t < |terms|`) projects every unselected column onto the
/// span of the selected ones, records the squared projection norm and adds one
/// minimizer to the selection. The weight of a candidate is the sum of its
/// recorded values; selected candidates contribute zero from then on.
pub fn algorithm1_weights(m: &ModelMatrix, tie_break: TieBreak) -> Result<WeightTrace> {
    let g_count = m.candidate_count();
    let steps = m.term_count();
    let columns: Vec<DVector<f64>> = (0..g_count).map(|g| m.column(g)).collect();
    if columns[0].norm() == 0.0 {
        return Err(DesignError::spec(
            "the first candidate has an all-zero model column",
        ));
    }
    let mut rng = match tie_break {
        TieBreak::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        TieBreak::SmallestIndex => None,
    };
    let tie_tol = TIE_RTOL * columns.iter().map(|c| c.norm_squared()).fold(1.0, f64::max);

    let mut selected = vec![false; g_count];
    selected[0] = true;
    let mut order = vec![0];
    let mut basis = OrthonormalBasis::new();
    basis.push(&columns[0]);
    let mut l_matrix = DMatrix::zeros(g_count, steps);

    for t in 0..steps {
        if order.len() == g_count {
            break;
        }
        let mut min = f64::INFINITY;
        for g in (0..g_count).filter(|&g| !selected[g]) {
            let l = basis.projection_norm_sq(&columns[g]);
            l_matrix[(g, t)] = l;
            min = min.min(l);
        }
        let ties: Vec<usize> = (0..g_count)
            .filter(|&g| !selected[g] && l_matrix[(g, t)] <= min + tie_tol)
            .collect();
        let next = match rng.as_mut() {
            Some(rng) => ties[rng.random_range(0..ties.len())],
            None => ties[0],
        };
        selected[next] = true;
        order.push(next);
        basis.push(&columns[next]);
    }

    let lambdas = (0..g_count).map(|g| l_matrix.row(g).sum()).collect();
    Ok(WeightTrace {
        lambdas,
        selection_order: order,
        l_matrix,
    })
}

/// Multiplies every weight by `scale`.
pub fn scale_weights(trace: &WeightTrace, scale: f64) -> Result<WeightTrace> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(DesignError::spec(format!(
            "weight scale must be positive, got {scale}"
        )));
    }
    let mut out = trace.clone();
    out.lambdas.iter_mut().for_each(|l| *l *= scale);
    Ok(out)
}

/// Sets the weights of already observed candidates to zero so they are kept for free.
pub fn zero_fixed_points(lambdas: &mut [f64], fixed: &[usize]) -> Result<()> {
    for &g in fixed {
        let slot = lambdas
            .get_mut(g)
            .ok_or_else(|| DesignError::spec(format!("fixed point {g} is not a candidate")))?;
        *slot = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{
        build_model_matrix, enumerate_full_factorial, main_effect_terms, two_level_factors,
        ModelSpec,
    };

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn main_effect_matrix(f: usize) -> ModelMatrix {
        let spec = ModelSpec::new(
            two_level_factors(f),
            main_effect_terms(f),
            (1..=f).collect(),
        )
        .unwrap();
        build_model_matrix(&enumerate_full_factorial(spec.factors()), &spec).unwrap()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(projection_norm_sq(&v(&[0., 1.]), &[v(&[1., 0.])]), 0.0);
        assert_eq!(projection_norm_sq(&v(&[1., 1.]), &[v(&[1., 0.])]), 1.0);
        let a1 = v(&[1., -1., -1., -1.]);
        let a2 = v(&[1., -1., -1., 1.]);
        assert!((projection_norm_sq(&a2, &[a1]) - 1.0).abs() < 1e-15);
        assert_eq!(projection_norm_sq(&v(&[3., 4.]), &[]), 0.0);
    }

    #[test]
    fn dependent_vectors_are_dropped() {
        let mut b = OrthonormalBasis::new();
        assert!(b.push(&v(&[1., 1., 0.])));
        assert!(!b.push(&v(&[2., 2., 0.])));
        assert!(b.push(&v(&[0., 1., 0.])));
        assert_eq!(b.dim(), 2);
        assert!((b.projection_norm_sq(&v(&[5., 7., 3.])) - 74.0).abs() < 1e-12);
    }

    #[test]
    fn single_candidate() {
        let m = ModelMatrix::from_matrix(DMatrix::from_row_slice(2, 1, &[1.0, 1.0])).unwrap();
        let t = algorithm1_weights(&m, TieBreak::SmallestIndex).unwrap();
        assert_eq!(t.lambdas, vec![0.0]);
        assert_eq!(t.selection_order, vec![0]);
    }

    #[test]
    fn two_step_trace() {
        let m =
            ModelMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
        let t = algorithm1_weights(&m, TieBreak::SmallestIndex).unwrap();
        assert_eq!(t.selection_order, vec![0, 1]);
        assert_eq!(t.lambdas, vec![0.0, 1.0]);
        assert_eq!(t.l_matrix[(1, 0)], 1.0);
    }

    #[test]
    fn zero_first_column_is_rejected() {
        let m = ModelMatrix::from_matrix(DMatrix::from_row_slice(1, 2, &[0.0, 1.0])).unwrap();
        assert!(algorithm1_weights(&m, TieBreak::SmallestIndex).is_err());
    }

    #[test]
    fn three_factor_main_effects() {
        let t = algorithm1_weights(&main_effect_matrix(3), TieBreak::SmallestIndex).unwrap();
        assert_eq!(t.selection_order, vec![0, 3, 5, 6, 1]);
        let expected = [0., 10., 10., 0., 10., 0., 0., 10.];
        for (a, b) in t.lambdas.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{:?}", t.lambdas);
        }
        assert!(t.non_argmin_steps().is_empty());
    }

    #[test]
    fn trace_invariants() {
        for tie in [TieBreak::SmallestIndex, TieBreak::SeededRandom(7)] {
            let t = algorithm1_weights(&main_effect_matrix(4), tie).unwrap();
            assert_eq!(t.selection_order.len(), 6);
            let mut seen = t.selection_order.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 6);
            for g in 0..16 {
                assert!((t.lambdas[g] - t.l_matrix.row(g).sum()).abs() < 1e-12);
                assert!(t.l_matrix.row(g).iter().all(|&x| x >= 0.0));
            }
            // selected candidates contribute nothing from the step they joined
            for (pos, &g) in t.selection_order.iter().enumerate() {
                for step in pos..5 {
                    assert_eq!(t.l_matrix[(g, step)], 0.0);
                }
            }
            assert!(t.non_argmin_steps().is_empty());
        }
    }

    #[test]
    fn seeded_ties_are_reproducible() {
        let m = main_effect_matrix(4);
        let a = algorithm1_weights(&m, TieBreak::SeededRandom(3)).unwrap();
        let b = algorithm1_weights(&m, TieBreak::SeededRandom(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling() {
        let t = algorithm1_weights(&main_effect_matrix(3), TieBreak::SmallestIndex).unwrap();
        assert_eq!(scale_weights(&t, 1.0).unwrap(), t);
        let doubled = scale_weights(&t, 2.0).unwrap();
        assert!((doubled.lambdas[1] - 20.0).abs() < 1e-12);
        let halved = scale_weights(&t, 0.5).unwrap();
        for (h, l) in halved.lambdas.iter().zip(&t.lambdas) {
            assert_eq!(*h, l * 0.5);
        }
        assert!(scale_weights(&t, 0.0).is_err());
        assert!(scale_weights(&t, -1.0).is_err());
    }

    #[test]
    fn fixed_points_zero_their_weights() {
        let mut l = vec![1.0, 2.0, 3.0];
        zero_fixed_points(&mut l, &[1]).unwrap();
        assert_eq!(l, vec![1.0, 0.0, 3.0]);
        assert!(zero_fixed_points(&mut l, &[3]).is_err());
    }
}
