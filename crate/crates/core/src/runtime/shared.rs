use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use parking_lot::RwLock;

use crate::numerics::DenseMatrix;

/// The server's copy of `V`, one lock per column.
///
/// Reads take column locks one at a time, so a snapshot may mix columns from
/// different moments; individual columns are never torn.
#[derive(Debug)]
pub struct SharedModel {
    dim: usize,
    columns: Vec<RwLock<Vec<f64>>>,
    versions: Vec<AtomicU64>,
    accepted: AtomicUsize,
}

impl SharedModel {
    pub fn new(initial: &DenseMatrix) -> Self {
        let (d, t_count) = initial.shape();
        Self {
            dim: d,
            columns: (0..t_count).map(|t| RwLock::new(initial.column(t))).collect(),
            versions: (0..t_count).map(|_| AtomicU64::new(0)).collect(),
            accepted: AtomicUsize::new(0),
        }
    }

    pub fn task_count(&self) -> usize {
        self.columns.len()
    }

    /// Number of updates accepted so far.
    pub fn accepted(&self) -> usize {
        self.accepted.load(Ordering::SeqCst)
    }

    pub fn version(&self, t: usize) -> u64 {
        self.versions[t].load(Ordering::SeqCst)
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        self.columns[t].read().clone()
    }

    pub fn snapshot(&self) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = (0..self.task_count()).map(|t| self.column(t)).collect();
        DenseMatrix::from_columns(self.dim, &cols).expect("columns share the model dimension")
    }

    /// Replaces column `t` atomically and returns the global index of this update.
    pub fn write_column(&self, t: usize, values: Vec<f64>) -> usize {
        assert_eq!(values.len(), self.dim, "column length");
        let mut guard = self.columns[t].write();
        *guard = values;
        self.versions[t].fetch_add(1, Ordering::SeqCst);
        self.accepted.fetch_add(1, Ordering::SeqCst)
    }
}
