//! Proximal (backward) maps, the per-task forward step, the composed
//! backward-forward block operator and the relaxed KM block update.

use crate::error::{Error, Result};
use crate::model::{MtlProblem, Regularizer};
use crate::numerics::{norm2, thin_svd, DenseMatrix, SvdFactors};

#[derive(Debug, Clone)]
pub struct ProxResult {
    pub w_matrix: DenseMatrix,
    /// SVD of the input; only present for the nuclear norm.
    pub factors_used: Option<SvdFactors>,
    pub threshold: f64,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::Argument(format!("prox threshold must be >= 0, got {threshold}")));
    }
    Ok(())
}

/// Singular value soft-thresholding: `U (Σ − θI)₊ Qᵀ`.
pub fn prox_nuclear(v_hat: &DenseMatrix, threshold: f64) -> Result<ProxResult> {
    check_threshold(threshold)?;
    let factors = thin_svd(v_hat)?;
    let shrunk: Vec<f64> = factors.s.iter().map(|s| (s - threshold).max(0.0)).collect();
    let w_matrix = factors.recompose_with(&shrunk);
    Ok(ProxResult {
        w_matrix,
        factors_used: Some(factors),
        threshold,
    })
}

/// Row-wise group soft-thresholding: `wⁱ ← max(0, 1 − θ/‖wⁱ‖)·wⁱ`.
pub fn prox_l21(v_hat: &DenseMatrix, threshold: f64) -> Result<DenseMatrix> {
    check_threshold(threshold)?;
    let mut out = v_hat.clone();
    for i in 0..v_hat.rows() {
        let nrm = norm2(v_hat.row(i));
        // zero rows (and rows at or inside the threshold) collapse to zero
        let scale = if nrm > threshold { 1.0 - threshold / nrm } else { 0.0 };
        for j in 0..v_hat.cols() {
            out[(i, j)] = scale * v_hat[(i, j)];
        }
    }
    Ok(out)
}

/// `Prox_{ηλg}(v)` for the problem's regularizer.
pub fn prox(problem: &MtlProblem, v: &DenseMatrix, eta: f64) -> Result<DenseMatrix> {
    let threshold = eta * problem.lambda();
    if threshold == 0.0 {
        return Ok(v.clone());
    }
    match problem.regularizer() {
        Regularizer::NuclearNorm => Ok(prox_nuclear(v, threshold)?.w_matrix),
        Regularizer::L21 => prox_l21(v, threshold),
    }
}

/// New value proposed for one task column by the backward-forward operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCandidate {
    pub task_id: usize,
    pub v_new: Vec<f64>,
}

/// The backward-forward operator `(I − η∇f) ∘ Prox_{ηλg}` for a fixed problem
/// and an admissible step `η ∈ (0, 2/L)`.
#[derive(Debug, Clone)]
pub struct BackwardForward<'a> {
    problem: &'a MtlProblem,
    eta: f64,
    lipschitz: f64,
}

impl<'a> BackwardForward<'a> {
    pub fn new(problem: &'a MtlProblem, eta: f64) -> Result<Self> {
        let lipschitz = problem.lipschitz()?;
        Self::with_lipschitz(problem, eta, lipschitz)
    }

    /// Skips re-estimating `L` when the caller already has it.
    pub fn with_lipschitz(problem: &'a MtlProblem, eta: f64, lipschitz: f64) -> Result<Self> {
        let upper = 2.0 / lipschitz;
        if !(eta > 0.0 && eta < upper) {
            return Err(Error::Config(format!(
                "step size eta={eta} outside (0, 2/L) = (0, {upper:.6e}) for L={lipschitz:.6e}"
            )));
        }
        Ok(Self {
            problem,
            eta,
            lipschitz,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn problem(&self) -> &MtlProblem {
        self.problem
    }

    /// Backward step over the whole matrix.
    pub fn backward(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        prox(self.problem, v, self.eta)
    }

    /// Forward step on one column of an already-proximal matrix.
    pub fn forward_block(&self, prox_column: &[f64], task_id: usize) -> Result<BlockCandidate> {
        let grad = self.problem.task_gradient(task_id, prox_column)?;
        let v_new: Vec<f64> = prox_column
            .iter()
            .zip(&grad)
            .map(|(p, g)| p - self.eta * g)
            .collect();
        Ok(BlockCandidate { task_id, v_new })
    }

    /// One full backward step followed by a forward step on `task_id` only.
    pub fn block(&self, v_snapshot: &DenseMatrix, task_id: usize) -> Result<BlockCandidate> {
        let p = self.backward(v_snapshot)?;
        self.forward_block(&p.column(task_id), task_id)
    }

    /// The operator applied to every block at once.
    pub fn full(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        let p = self.backward(v)?;
        let mut columns = Vec::with_capacity(p.cols());
        for t in 0..p.cols() {
            columns.push(self.forward_block(&p.column(t), t)?.v_new);
        }
        DenseMatrix::from_columns(p.rows(), &columns)
    }
}

pub fn backward_forward_block(
    problem: &MtlProblem,
    v_snapshot: &DenseMatrix,
    task_id: usize,
    eta: f64,
) -> Result<BlockCandidate> {
    BackwardForward::new(problem, eta)?.block(v_snapshot, task_id)
}

/// Relaxed block update `v + m·η_k·(candidate − v)`.
pub fn km_update(
    v_t: &[f64],
    candidate: &BlockCandidate,
    eta_k: f64,
    multiplier: f64,
) -> Result<Vec<f64>> {
    if !(eta_k > 0.0) {
        return Err(Error::Argument(format!("eta_k must be > 0, got {eta_k}")));
    }
    if !(multiplier >= 1.0) {
        return Err(Error::Argument(format!("multiplier must be >= 1, got {multiplier}")));
    }
    if v_t.len() != candidate.v_new.len() {
        return Err(Error::dim("km_update", v_t.len(), candidate.v_new.len()));
    }
    if candidate.v_new.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            task: candidate.task_id,
            k: usize::MAX,
        });
    }
    let step = multiplier * eta_k;
    if step == 1.0 {
        return Ok(candidate.v_new.clone());
    }
    Ok(v_t
        .iter()
        .zip(&candidate.v_new)
        .map(|(v, c)| v + step * (c - v))
        .collect())
}

/// Final backward step mapping the auxiliary variable to the model.
pub fn recover_w(problem: &MtlProblem, v_final: &DenseMatrix, eta: f64) -> Result<DenseMatrix> {
    prox(problem, v_final, eta)
}

/// Relative forward-backward fixed-point residual
/// `‖w − Prox(w − η∇f(w))‖_F / max(1, ‖w‖_F)`; zero exactly at optimality.
pub fn optimality_residual(problem: &MtlProblem, w: &DenseMatrix, eta: f64) -> Result<f64> {
    let mut stepped = w.clone();
    for t in 0..problem.task_count() {
        let col = w.column(t);
        let grad = problem.task_gradient(t, &col)?;
        let next: Vec<f64> = col.iter().zip(&grad).map(|(c, g)| c - eta * g).collect();
        stepped.set_column(t, &next);
    }
    let fb = prox(problem, &stepped, eta)?;
    Ok(w.sub(&fb)?.frobenius_norm() / w.frobenius_norm().max(1.0))
}
