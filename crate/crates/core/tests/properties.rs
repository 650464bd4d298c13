//! Randomized invariants across modules.

use nalgebra::{DMatrix, DVector};
use oadesigner::analysis::{check_unbiasedness, design_equivalent};
use oadesigner::design::{
    build_model_matrix, enumerate_full_factorial, main_effect_terms, two_level_factors,
    ModelMatrix, ModelSpec,
};
use oadesigner::solver::{solve_constrained, GroupLassoProblem, Status};
use oadesigner::weights::{algorithm1_weights, projection_norm_sq, TieBreak};
use proptest::prelude::*;

fn vectors(dim: usize, count: usize) -> impl Strategy<Value = Vec<DVector<f64>>> {
    prop::collection::vec(prop::collection::vec(-4.0f64..4.0, dim), count)
        .prop_map(|vs| vs.into_iter().map(DVector::from_vec).collect())
}

fn three_factor() -> ModelMatrix {
    let spec = ModelSpec::new(two_level_factors(3), main_effect_terms(3), vec![1, 2, 3]).unwrap();
    build_model_matrix(&enumerate_full_factorial(spec.factors()), &spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_ignores_basis_order((basis, v) in (1usize..7).prop_flat_map(|d| (vectors(d, d.min(4)), vectors(d, 1)))) {
        let forward = projection_norm_sq(&v[0], &basis);
        let reversed: Vec<_> = basis.iter().rev().cloned().collect();
        let backward = projection_norm_sq(&v[0], &reversed);
        prop_assert!((forward - backward).abs() <= 1e-9 * v[0].norm_squared().max(1.0));
        prop_assert!(forward <= v[0].norm_squared() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn weights_ignore_term_order(perm in Just((0..4).collect::<Vec<usize>>()).prop_shuffle()) {
        // reordering the model terms is an orthogonal map of the column space
        let m = three_factor();
        let permuted = ModelMatrix::from_matrix(m.values().select_rows(&perm)).unwrap();
        let a = algorithm1_weights(&m, TieBreak::SmallestIndex).unwrap();
        let b = algorithm1_weights(&permuted, TieBreak::SmallestIndex).unwrap();
        prop_assert_eq!(&a.selection_order, &b.selection_order);
        for (x, y) in a.lambdas.iter().zip(&b.lambdas) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn equivalence_survives_relabelling(
        rows in 1usize..5,
        seed_bits in prop::collection::vec(any::<bool>(), 40),
        run_perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle(),
        row_seed in any::<u64>(),
        flips in prop::collection::vec(any::<bool>(), 5),
    ) {
        let d = DMatrix::from_fn(rows, 8, |r, c| if seed_bits[r * 8 + c] { 1.0 } else { -1.0 });
        let mut row_perm: Vec<usize> = (0..rows).collect();
        row_perm.rotate_left((row_seed as usize) % rows);
        let e = DMatrix::from_fn(rows, 8, |r, c| {
            let x = d[(row_perm[r], run_perm[c])];
            if flips[r] { -x } else { x }
        });
        prop_assert!(design_equivalent(&d, &e).equivalent);
    }

    #[test]
    fn constrained_solutions_are_feasible(lambdas in prop::collection::vec(0.0f64..12.0, 8)) {
        let m = three_factor();
        let problem = GroupLassoProblem::constrained(m.clone(), vec![1, 2, 3], lambdas).unwrap();
        let sol = solve_constrained(&problem).unwrap();
        prop_assert_eq!(sol.status, Status::Converged);
        prop_assert!(check_unbiasedness(&m, &[1, 2, 3], &sol.coefficients, 1e-8).unwrap().passed);
        prop_assert!(sol.certificate.holds(1e-6), "{:?}", sol.certificate);
    }
}
