mod support;

use amtl_core::model::{loss_gradient, LossKind, Regularizer};
use amtl_core::numerics::{norm2, DenseMatrix};
use proptest::prelude::*;
use support::*;

#[test]
fn gradients_match_central_differences() {
    let mut r = rng(2024);
    for kind in [LossKind::Squared, LossKind::Logistic] {
        for _ in 0..100 {
            let task = random_task(&mut r, 8, 4, kind);
            let w = random_vec(&mut r, 4, 1.5);
            let g = loss_gradient(&task, &w).unwrap();
            let fd = fd_gradient(&task, &w, 1e-6);
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            let rel = norm2(&diff) / norm2(&g).max(1.0);
            assert!(rel <= 1e-6, "{kind}: {rel}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_is_convex_along_segments(seed in any::<u64>(), l21 in any::<bool>()) {
        let reg = if l21 { Regularizer::L21 } else { Regularizer::NuclearNorm };
        let p = random_problem(seed, 3, 6, 4, 0.7, reg, true);
        let mut r = rng(seed ^ 0xabcd);
        let a = random_matrix(&mut r, 4, 3, 2.0);
        let b = random_matrix(&mut r, 4, 3, 2.0);
        let mid = a.axpy(1.0, &b).unwrap().scale(0.5);
        let fa = p.objective(&a).unwrap();
        let fb = p.objective(&b).unwrap();
        prop_assert!(p.objective(&mid).unwrap() <= 0.5 * (fa + fb) + 1e-9);
    }

    #[test]
    fn lambda_zero_objective_is_loss_sum(seed in any::<u64>()) {
        let p = random_problem(seed, 4, 5, 3, 0.0, Regularizer::NuclearNorm, true);
        let mut r = rng(seed);
        let w = random_matrix(&mut r, 3, 4, 1.0);
        let direct: f64 = (0..4).map(|t| amtl_core::model::loss_value(p.task(t), &w.column(t)).unwrap()).sum();
        prop_assert_eq!(p.objective(&w).unwrap(), direct);
    }
}

#[test]
fn objective_shape_errors() {
    let p = random_problem(1, 2, 3, 3, 1.0, Regularizer::NuclearNorm, false);
    assert!(p.objective(&DenseMatrix::zeros(2, 3)).is_err());
}
