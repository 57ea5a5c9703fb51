//! Independent oracles shared by the integration and acceptance suites.
//!
//! Nothing here goes through the asynchronous engines; the SVD-based
//! oracle uses nalgebra rather than the crate's own Jacobi SVD.

#![allow(dead_code)]

use amtl_core::model::{loss_value, LossKind, MtlProblem, Regularizer, TaskDataset};
use amtl_core::numerics::DenseMatrix;
use amtl_core::operators::prox;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_task(rng: &mut ChaCha8Rng, n: usize, d: usize, kind: LossKind) -> TaskDataset {
    let x = random_matrix(rng, n, d, 1.0);
    let y = match kind {
        LossKind::Squared => random_vec(rng, n, 2.0),
        LossKind::Logistic => (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect(),
    };
    TaskDataset::new(0, x, y, kind).unwrap()
}

/// Small problem with alternating loss kinds when `mixed`.
pub fn random_problem(
    seed: u64,
    t_count: usize,
    n: usize,
    d: usize,
    lambda: f64,
    regularizer: Regularizer,
    mixed: bool,
) -> MtlProblem {
    let mut r = rng(seed);
    let tasks = (0..t_count)
        .map(|t| {
            let kind = if mixed && t % 2 == 1 {
                LossKind::Logistic
            } else {
                LossKind::Squared
            };
            random_task(&mut r, n, d, kind)
        })
        .collect();
    MtlProblem::new(tasks, lambda, regularizer).unwrap()
}

/// Central finite-difference gradient of one task loss.
pub fn fd_gradient(task: &TaskDataset, w: &[f64], h: f64) -> Vec<f64> {
    (0..w.len())
        .map(|i| {
            let mut plus = w.to_vec();
            let mut minus = w.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (loss_value(task, &plus).unwrap() - loss_value(task, &minus).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Plain gradient of the smooth part at every column, by hand.
fn full_gradient(problem: &MtlProblem, w: &DenseMatrix) -> DenseMatrix {
    let mut g = DenseMatrix::zeros(w.rows(), w.cols());
    for t in 0..w.cols() {
        g.set_column(t, &problem.task_gradient(t, &w.column(t)).unwrap());
    }
    g
}

/// Synchronous proximal gradient (ISTA) with step `1/L` from `W = 0`.
pub fn ista(problem: &MtlProblem, iterations: usize) -> DenseMatrix {
    let eta = 1.0 / problem.lipschitz().unwrap();
    let mut w = DenseMatrix::zeros(problem.dim(), problem.task_count());
    for _ in 0..iterations {
        let g = full_gradient(problem, &w);
        w = prox(problem, &w.axpy(-eta, &g).unwrap(), eta).unwrap();
    }
    w
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// `½‖W − V̂‖_F² + θ‖W‖_*`, evaluated with nalgebra's SVD.
pub fn nuclear_prox_objective(w: &DenseMatrix, v_hat: &DenseMatrix, theta: f64) -> f64 {
    let diff = w.sub(v_hat).unwrap().frobenius_norm();
    let nuc: f64 = to_na(w).singular_values().iter().sum();
    0.5 * diff * diff + theta * nuc
}

/// Subgradient descent on `½‖W − V̂‖² + θ‖W‖_*` with steps `1/(k+1)`;
/// returns the best objective value seen.
pub fn nuclear_prox_subgradient_oracle(v_hat: &DenseMatrix, theta: f64, iterations: usize) -> f64 {
    let target = to_na(v_hat);
    let mut w = target.clone();
    let mut best = f64::INFINITY;
    for k in 0..iterations {
        let svd = w.clone().svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let diff = &w - &target;
        let obj = 0.5 * diff.norm_squared() + theta * svd.singular_values.iter().sum::<f64>();
        best = best.min(obj);
        // minimal-norm subgradient of the nuclear norm: U_+ V_+ᵀ over the support
        let mut sub = DMatrix::zeros(w.nrows(), w.ncols());
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > 1e-12 {
                sub += u.column(i) * vt.row(i);
            }
        }
        let step = 1.0 / (k as f64 + 1.0);
        w -= (diff + sub * theta) * step;
    }
    best
}

/// Row-wise closed form of the ℓ2,1 prox, written out directly.
pub fn l21_closed_form(v_hat: &DenseMatrix, theta: f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(v_hat.rows(), v_hat.cols());
    for i in 0..v_hat.rows() {
        let norm = v_hat.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= theta {
            continue;
        }
        for j in 0..v_hat.cols() {
            out[(i, j)] = v_hat[(i, j)] * (norm - theta) / norm;
        }
    }
    out
}

pub fn rel_gap(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-12)
}
