mod support;

use amtl_core::model::{loss_gradient, LossKind, TaskDataset};
use amtl_core::numerics::{gemm, lipschitz_bound, norm2, thin_svd, DenseMatrix};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use support::*;

fn orthonormality_error(m: &DenseMatrix) -> f64 {
    let g = gemm(&m.transpose(), m).unwrap();
    g.sub(&DenseMatrix::identity(g.rows())).unwrap().max_abs()
}

#[test]
fn squared_singular_values_match_gram_eigenvalues() {
    let mut r = rng(5);
    let a = random_matrix(&mut r, 5, 3, 1.0);
    let f = thin_svd(&a).unwrap();

    let na = DMatrix::from_row_slice(5, 3, a.as_slice());
    let mut eig: Vec<f64> = SymmetricEigen::new(na.transpose() * &na).eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    for (s, e) in f.s.iter().zip(&eig) {
        assert!((s * s - e).abs() <= 1e-10 * e.max(1.0), "{s}^2 vs {e}");
    }
    let err = f.recompose().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm().max(1.0);
    assert!(err <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_reconstructs_and_is_orthonormal(rows in 1usize..=64, cols in 1usize..=64, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, rows, cols, 3.0);
        let f = thin_svd(&a).unwrap();
        let err = f.recompose().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm().max(1.0);
        prop_assert!(err <= 1e-8, "reconstruction {err}");
        prop_assert!(orthonormality_error(&f.u) <= 1e-8);
        prop_assert!(orthonormality_error(&f.q) <= 1e-8);
        prop_assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.s.iter().all(|&s| s >= 0.0));
        prop_assert_eq!(thin_svd(&a).unwrap(), f);
    }

    #[test]
    fn squared_lipschitz_bounds_gradient_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let task: TaskDataset = random_task(&mut r, 12, 5, LossKind::Squared);
        let l = lipschitz_bound(task.x(), LossKind::Squared).unwrap();
        let w = random_vec(&mut r, 5, 3.0);
        let w2 = random_vec(&mut r, 5, 3.0);
        let g = loss_gradient(&task, &w).unwrap();
        let g2 = loss_gradient(&task, &w2).unwrap();
        let num: Vec<f64> = g.iter().zip(&g2).map(|(a, b)| a - b).collect();
        let den: Vec<f64> = w.iter().zip(&w2).map(|(a, b)| a - b).collect();
        prop_assert!(norm2(&num) / norm2(&den) <= l * (1.0 + 1e-9));
    }
}

#[test]
fn lipschitz_tracks_svd_on_random_data() {
    let mut r = rng(77);
    for _ in 0..10 {
        let x = random_matrix(&mut r, 10, 4, 1.0);
        let smax = thin_svd(&x).unwrap().s[0];
        for (kind, expected) in [(LossKind::Squared, 2.0 * smax * smax), (LossKind::Logistic, smax * smax / 4.0)] {
            let l = lipschitz_bound(&x, kind).unwrap();
            assert!((l - expected).abs() / expected <= 1e-5);
        }
    }
}
