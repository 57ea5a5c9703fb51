//! Synthetic low-rank problem generation and the on-disk task directory
//! format.
//!
//! A task directory holds `manifest.txt` plus one headerless CSV per task.
//! Each CSV row is one sample: `d` feature columns followed by the label.
//! The manifest is line oriented; blank lines and `#` comments are ignored:
//!
//! ```text
//! lambda 1
//! regularizer nuclear
//! l2_augment 0
//! task task_000.csv squared
//! task task_001.csv logistic
//! ```
//!
//! Floats are written in shortest round-trip form so a write/load cycle is
//! bit exact.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{LossKind, MtlProblem, Regularizer, TaskDataset};
use crate::numerics::{gemm, gemv, DenseMatrix};

pub const MANIFEST_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub t_count: usize,
    pub n_per_task: usize,
    pub dim: usize,
    pub true_rank: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub lambda: f64,
    pub regularizer: Regularizer,
}

/// `ceil(min(d, T) / 5)`.
pub fn default_rank(dim: usize, t_count: usize) -> usize {
    dim.min(t_count).div_ceil(5).max(1)
}

impl SyntheticSpec {
    /// Spec with the default rank, unit noise-free squared loss, λ = 1 and
    /// the nuclear norm.
    pub fn new(t_count: usize, n_per_task: usize, dim: usize, seed: u64) -> Self {
        Self {
            t_count,
            n_per_task,
            dim,
            true_rank: default_rank(dim, t_count),
            noise_sigma: 0.0,
            seed,
            loss_kind: LossKind::Squared,
            lambda: 1.0,
            regularizer: Regularizer::NuclearNorm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_count == 0 || self.n_per_task == 0 || self.dim == 0 {
            return Err(Error::Argument(
                "tasks, samples and dimension must all be positive".into(),
            ));
        }
        if self.true_rank == 0 || self.true_rank > self.dim.min(self.t_count) {
            return Err(Error::Argument(format!(
                "rank must lie in [1, min(d, T)] = [1, {}], got {}",
                self.dim.min(self.t_count),
                self.true_rank
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Argument(format!("noise must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

/// Generates a problem together with the low-rank model that produced it.
pub fn gen_synthetic_with_truth(spec: &SyntheticSpec) -> Result<(MtlProblem, DenseMatrix)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scale = 1.0 / (spec.true_rank as f64).sqrt();
    let a = normal_matrix(&mut rng, spec.dim, spec.true_rank, scale);
    let b = normal_matrix(&mut rng, spec.true_rank, spec.t_count, scale);
    let w_star = gemm(&a, &b)?;

    let mut tasks = Vec::with_capacity(spec.t_count);
    for t in 0..spec.t_count {
        let x = normal_matrix(&mut rng, spec.n_per_task, spec.dim, 1.0);
        let clean = gemv(&x, &w_star.column(t))?;
        let y: Vec<f64> = clean
            .into_iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let noisy = v + spec.noise_sigma * z;
                match spec.loss_kind {
                    LossKind::Squared => noisy,
                    LossKind::Logistic if noisy >= 0.0 => 1.0,
                    LossKind::Logistic => -1.0,
                }
            })
            .collect();
        tasks.push(TaskDataset::new(t, x, y, spec.loss_kind)?);
    }
    let problem = MtlProblem::new(tasks, spec.lambda, spec.regularizer)?;
    Ok((problem, w_star))
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<MtlProblem> {
    Ok(gen_synthetic_with_truth(spec)?.0)
}

fn task_file_name(t: usize) -> String {
    format!("task_{t:03}.csv")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Writes `problem` as a task directory (created if missing).
pub fn write_csv_dir(problem: &MtlProblem, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("# amtl task manifest\n");
    manifest.push_str(&format!("lambda {}\n", problem.lambda()));
    manifest.push_str(&format!("regularizer {}\n", problem.regularizer()));
    manifest.push_str(&format!("l2_augment {}\n", problem.l2_augment()));
    for (t, task) in problem.tasks().iter().enumerate() {
        let name = task_file_name(t);
        manifest.push_str(&format!("task {name} {}\n", task.loss_kind()));
        let path = dir.join(&name);
        let mut w = csv_writer(&path)?;
        for i in 0..task.samples() {
            let row = task
                .x()
                .row(i)
                .iter()
                .chain(std::iter::once(&task.y()[i]))
                .map(|v| v.to_string());
            w.write_record(row).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let mpath = dir.join(MANIFEST_NAME);
    fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))
}

struct ManifestEntry {
    file: PathBuf,
    loss: LossKind,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{what}: '{field}' is not finite")));
    }
    Ok(v)
}

fn load_task(path: &Path, task_id: usize, loss: LossKind) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(parse_err(
                path,
                line,
                format!("expected {w} columns, found {}", record.len()),
            ));
        }
        if w < 2 {
            return Err(parse_err(path, line, "need at least one feature and a label"));
        }
        let mut values = Vec::with_capacity(w);
        for (c, field) in record.iter().enumerate() {
            values.push(parse_f64(path, line, field, &format!("column {}", c + 1))?);
        }
        let y = values.pop().expect("w >= 2");
        if loss == LossKind::Logistic && y != 1.0 && y != -1.0 {
            return Err(parse_err(
                path,
                line,
                format!("task {task_id}: logistic label {y} is not -1 or +1"),
            ));
        }
        rows.push(values);
        labels.push(y);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "task file has no samples"));
    }
    Ok((rows, labels))
}

/// Loads and validates a task directory written by [`write_csv_dir`] or by hand.
pub fn load_csv_dir(dir: impl AsRef<Path>) -> Result<MtlProblem> {
    let dir = dir.as_ref();
    let mpath = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let mut lambda = None;
    let mut regularizer = Regularizer::NuclearNorm;
    let mut l2 = 0.0;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields.as_slice() {
            ["lambda", v] => lambda = Some(parse_f64(&mpath, line, v, "lambda")?),
            ["l2_augment", v] => l2 = parse_f64(&mpath, line, v, "l2_augment")?,
            ["regularizer", v] => {
                regularizer = v.parse().map_err(|e: Error| parse_err(&mpath, line, e.to_string()))?
            }
            ["task", file, loss] => entries.push(ManifestEntry {
                file: dir.join(file),
                loss: loss
                    .parse()
                    .map_err(|e: Error| parse_err(&mpath, line, e.to_string()))?,
            }),
            _ => return Err(parse_err(&mpath, line, format!("unrecognised entry '{content}'"))),
        }
    }
    let lambda = lambda.ok_or_else(|| parse_err(&mpath, 0, "manifest has no lambda entry"))?;
    if entries.is_empty() {
        return Err(parse_err(&mpath, 0, "manifest lists no tasks"));
    }

    let mut tasks = Vec::with_capacity(entries.len());
    let mut dim = None;
    for (t, entry) in entries.iter().enumerate() {
        let (rows, labels) = load_task(&entry.file, t, entry.loss)?;
        let d = rows[0].len();
        let expected = *dim.get_or_insert(d);
        if d != expected {
            return Err(parse_err(
                &entry.file,
                1,
                format!("task has d={d} features but earlier tasks have d={expected}"),
            ));
        }
        let x = DenseMatrix::from_rows(&rows)?;
        tasks.push(TaskDataset::new(t, x, labels, entry.loss)?);
    }
    MtlProblem::with_l2(tasks, lambda, regularizer, l2)
}
