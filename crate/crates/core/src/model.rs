//! Task data, per-task losses and the joint regularized objective
//! `Σ_t ℓ_t(w_t) + λ g(W) + μ‖W‖_F²`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{dot, gemv, gemv_t, lipschitz_bound, norm2, thin_svd, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `‖xw − y‖²`
    Squared,
    /// `Σ log(1 + exp(−y⟨x, w⟩))` with labels in {−1, +1}.
    Logistic,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "squared" | "least-squares" => Ok(LossKind::Squared),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(Error::Argument(format!("unknown loss kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularizer {
    /// Sum of singular values; couples tasks through a shared low-rank subspace.
    NuclearNorm,
    /// Sum of row 2-norms; selects features jointly across tasks.
    L21,
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regularizer::NuclearNorm => "nuclear",
            Regularizer::L21 => "l21",
        })
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nuclear" | "trace" => Ok(Regularizer::NuclearNorm),
            "l21" | "l2,1" => Ok(Regularizer::L21),
            other => Err(Error::Argument(format!("unknown regularizer '{other}'"))),
        }
    }
}

/// One task's private data. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    x: DenseMatrix,
    y: Vec<f64>,
    loss_kind: LossKind,
    task_id: usize,
}

impl TaskDataset {
    pub fn new(task_id: usize, x: DenseMatrix, y: Vec<f64>, loss_kind: LossKind) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Argument(format!("task {task_id} has no samples")));
        }
        if x.rows() != y.len() {
            return Err(Error::dim(
                "TaskDataset::new",
                format!("{}x{}", x.rows(), x.cols()),
                format!("{} labels", y.len()),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("task {task_id} has non-finite labels")));
        }
        if loss_kind == LossKind::Logistic {
            if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
                return Err(Error::Argument(format!(
                    "task {task_id}: logistic label {} at sample {i} is not -1 or +1",
                    y[i]
                )));
            }
        }
        Ok(Self {
            x,
            y,
            loss_kind,
            task_id,
        })
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn samples(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::dim(
                "task loss",
                format!("task {} with d={}", self.task_id, self.dim()),
                format!("w of length {}", w.len()),
            ));
        }
        Ok(())
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn loss_value(task: &TaskDataset, w: &[f64]) -> Result<f64> {
    task.check_dim(w)?;
    let margin = gemv(&task.x, w)?;
    Ok(match task.loss_kind {
        LossKind::Squared => margin
            .iter()
            .zip(&task.y)
            .map(|(p, y)| (p - y) * (p - y))
            .sum(),
        LossKind::Logistic => margin
            .iter()
            .zip(&task.y)
            .map(|(p, y)| softplus(-y * p))
            .sum(),
    })
}

pub fn loss_gradient(task: &TaskDataset, w: &[f64]) -> Result<Vec<f64>> {
    task.check_dim(w)?;
    let margin = gemv(&task.x, w)?;
    let weights: Vec<f64> = match task.loss_kind {
        LossKind::Squared => margin
            .iter()
            .zip(&task.y)
            .map(|(p, y)| 2.0 * (p - y))
            .collect(),
        LossKind::Logistic => margin
            .iter()
            .zip(&task.y)
            .map(|(p, y)| -y * sigmoid(-y * p))
            .collect(),
    };
    gemv_t(&task.x, &weights)
}

/// The joint multi-task problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MtlProblem {
    tasks: Vec<TaskDataset>,
    lambda: f64,
    regularizer: Regularizer,
    l2_augment: f64,
}

impl MtlProblem {
    pub fn new(tasks: Vec<TaskDataset>, lambda: f64, regularizer: Regularizer) -> Result<Self> {
        Self::with_l2(tasks, lambda, regularizer, 0.0)
    }

    pub fn with_l2(
        tasks: Vec<TaskDataset>,
        lambda: f64,
        regularizer: Regularizer,
        l2_augment: f64,
    ) -> Result<Self> {
        let first = tasks
            .first()
            .ok_or_else(|| Error::Argument("problem needs at least one task".into()))?;
        let d = first.dim();
        if let Some(bad) = tasks.iter().find(|t| t.dim() != d) {
            return Err(Error::dim(
                "MtlProblem::new",
                format!("d={d}"),
                format!("task {} with d={}", bad.task_id, bad.dim()),
            ));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(l2_augment >= 0.0 && l2_augment.is_finite()) {
            return Err(Error::Argument(format!("l2_augment must be >= 0, got {l2_augment}")));
        }
        let tasks = tasks
            .into_iter()
            .enumerate()
            .map(|(i, mut t)| {
                t.task_id = i;
                t
            })
            .collect();
        Ok(Self {
            tasks,
            lambda,
            regularizer,
            l2_augment,
        })
    }

    pub fn tasks(&self) -> &[TaskDataset] {
        &self.tasks
    }

    pub fn task(&self, t: usize) -> &TaskDataset {
        &self.tasks[t]
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn dim(&self) -> usize {
        self.tasks[0].dim()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn l2_augment(&self) -> f64 {
        self.l2_augment
    }

    /// Largest sample count across tasks.
    pub fn max_samples(&self) -> usize {
        self.tasks.iter().map(TaskDataset::samples).max().unwrap_or(0)
    }

    /// Gradient of the smooth part restricted to one task block:
    /// the task loss plus the optional `μ‖w_t‖²` term.
    pub fn task_gradient(&self, t: usize, w: &[f64]) -> Result<Vec<f64>> {
        let mut g = loss_gradient(&self.tasks[t], w)?;
        if self.l2_augment > 0.0 {
            for (gi, wi) in g.iter_mut().zip(w) {
                *gi += 2.0 * self.l2_augment * wi;
            }
        }
        Ok(g)
    }

    /// Lipschitz constant of the smooth part: `max_t L_t + 2μ`.
    pub fn lipschitz(&self) -> Result<f64> {
        let mut l: f64 = 0.0;
        for t in &self.tasks {
            l = l.max(lipschitz_bound(t.x(), t.loss_kind())?);
        }
        Ok(l + 2.0 * self.l2_augment)
    }

    /// `g(W)` without the λ factor.
    pub fn regularizer_value(&self, w: &DenseMatrix) -> Result<f64> {
        Ok(match self.regularizer {
            Regularizer::NuclearNorm => thin_svd(w)?.s.iter().sum(),
            Regularizer::L21 => (0..w.rows()).map(|i| norm2(w.row(i))).sum(),
        })
    }

    fn check_shape(&self, w: &DenseMatrix) -> Result<()> {
        if w.shape() != (self.dim(), self.task_count()) {
            return Err(Error::dim(
                "objective",
                format!("problem d={} T={}", self.dim(), self.task_count()),
                format!("matrix {}x{}", w.rows(), w.cols()),
            ));
        }
        Ok(())
    }

    /// Sum of per-task losses only.
    pub fn loss_sum(&self, w: &DenseMatrix) -> Result<f64> {
        self.check_shape(w)?;
        let mut total = 0.0;
        for (t, task) in self.tasks.iter().enumerate() {
            total += loss_value(task, &w.column(t))?;
        }
        Ok(total)
    }

    pub fn objective(&self, w: &DenseMatrix) -> Result<f64> {
        let mut total = self.loss_sum(w)?;
        if self.lambda > 0.0 {
            total += self.lambda * self.regularizer_value(w)?;
        }
        if self.l2_augment > 0.0 {
            total += self.l2_augment * dot(w.as_slice(), w.as_slice());
        }
        Ok(total)
    }
}

/// Free-function form of [`MtlProblem::objective`].
pub fn objective(problem: &MtlProblem, w_matrix: &DenseMatrix) -> Result<f64> {
    problem.objective(w_matrix)
}
