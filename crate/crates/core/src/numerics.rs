//! Dense linear algebra: a row-major matrix type, products, a one-sided
//! Jacobi thin SVD and the Lipschitz estimates used to pick step sizes.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::LossKind;

/// Lower bound returned by [`lipschitz_bound`] for an all-zero data matrix.
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;
const POWER_MAX_ITERS: usize = 100_000;
const POWER_REL_TOL: f64 = 1e-12;

/// Row-major dense matrix of finite reals.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "DenseMatrix::new",
                format!("{rows}x{cols}"),
                format!("{} entries", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a rectangular matrix with `diag` on the main diagonal.
    pub fn from_diag(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::dim("DenseMatrix::from_rows", cols, bad.len()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Assembles a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::dim("DenseMatrix::from_columns", rows, bad.len()));
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows, "column length");
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::dim("axpy", shape_str(self), shape_str(other)));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

fn shape_str(m: &DenseMatrix) -> String {
    format!("{}x{}", m.rows, m.cols)
}

/// `a * v`.
pub fn gemv(a: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if a.cols != v.len() {
        return Err(Error::dim("gemv", shape_str(a), format!("vector of {}", v.len())));
    }
    Ok((0..a.rows).map(|i| dot(a.row(i), v)).collect())
}

/// `aᵀ * v`, without materialising the transpose.
pub fn gemv_t(a: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if a.rows != v.len() {
        return Err(Error::dim("gemv_t", shape_str(a), format!("vector of {}", v.len())));
    }
    let mut out = vec![0.0; a.cols];
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(a.row(i)) {
            *o += x * vi;
        }
    }
    Ok(out)
}

/// `a * b`.
pub fn gemm(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::dim("gemm", shape_str(a), shape_str(b)));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in orow.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin singular value decomposition `a = u · diag(s) · qᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    /// `rows × r`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-negative, non-increasing.
    pub s: Vec<f64>,
    /// `cols × r`, orthonormal columns.
    pub q: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `u · diag(values) · qᵀ` for an arbitrary replacement spectrum.
    pub fn recompose_with(&self, values: &[f64]) -> DenseMatrix {
        let (m, n) = (self.u.rows(), self.q.rows());
        let mut out = DenseMatrix::zeros(m, n);
        for (k, &sk) in values.iter().enumerate() {
            if sk == 0.0 {
                continue;
            }
            for i in 0..m {
                let uik = self.u[(i, k)] * sk;
                if uik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += uik * self.q[(j, k)];
                }
            }
        }
        out
    }

    pub fn recompose(&self) -> DenseMatrix {
        self.recompose_with(&self.s)
    }
}

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Sign convention: the largest-magnitude entry of each left singular vector
/// is non-negative, ties going to the lowest index. Together with the fixed
/// sweep order this makes the factors bitwise reproducible.
pub fn thin_svd(a: &DenseMatrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Argument(format!("thin_svd of empty {m}x{n} matrix")));
    }
    if !a.is_finite() {
        return Err(Error::Argument("thin_svd of non-finite matrix".into()));
    }
    // Jacobi orthogonalises columns, so work on the orientation with rows >= cols.
    let (left, s, right) = if m >= n {
        jacobi_tall(&a.column_vectors(), m)?
    } else {
        let (l, s, r) = jacobi_tall(&a.transpose().column_vectors(), n)?;
        (r, s, l)
    };
    let mut u = DenseMatrix::from_columns(m, &left)?;
    let mut q = DenseMatrix::from_columns(n, &right)?;
    for k in 0..s.len() {
        let col = u.column(k);
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            for i in 0..m {
                u[(i, k)] = -u[(i, k)];
            }
            for j in 0..n {
                q[(j, k)] = -q[(j, k)];
            }
        }
    }
    Ok(SvdFactors { u, s, q })
}

impl DenseMatrix {
    fn column_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }
}

type Tall = (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>);

/// Orthogonalises the `n` columns (each of length `m >= n`) in place; returns
/// (left vectors, singular values, right vectors), sorted by decreasing value.
fn jacobi_tall(cols: &[Vec<f64>], m: usize) -> Result<Tall> {
    let n = cols.len();
    let mut b: Vec<Vec<f64>> = cols.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let tol = f64::EPSILON * m as f64;

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::SvdNoConvergence {
                rows: m,
                cols: n,
                sweeps,
            });
        }
        sweeps += 1;
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let alpha = dot(&b[i], &b[i]);
                let beta = dot(&b[j], &b[j]);
                let gamma = dot(&b[i], &b[j]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut b, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        converged = !rotated;
    }

    let mut order: Vec<(usize, f64)> = b.iter().map(|col| norm2(col)).enumerate().collect();
    // Stable sort keeps equal singular values in column order.
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let smax = order.first().map_or(0.0, |o| o.1);
    let cutoff = smax * f64::EPSILON * m as f64;

    let mut left: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    let mut s = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for (slot, &(idx, sigma)) in order.iter().enumerate() {
        s.push(sigma);
        right.push(v[idx].clone());
        if sigma > cutoff && sigma > 0.0 {
            left.push(b[idx].iter().map(|x| x / sigma).collect());
        } else {
            left.push(vec![0.0; m]);
            deficient.push(slot);
        }
    }
    // Numerically null directions get an orthonormal completion from the
    // standard basis so that u stays column-orthonormal.
    let mut basis = 0;
    for slot in deficient {
        loop {
            assert!(basis < m, "ran out of basis vectors completing SVD");
            let mut cand = vec![0.0; m];
            cand[basis] = 1.0;
            basis += 1;
            for _ in 0..2 {
                for (k, other) in left.iter().enumerate() {
                    if k == slot {
                        continue;
                    }
                    let p = dot(&cand, other);
                    for (c, o) in cand.iter_mut().zip(other) {
                        *c -= p * o;
                    }
                }
            }
            let nrm = norm2(&cand);
            if nrm > 1e-6 {
                left[slot] = cand.iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
    Ok((left, s, right))
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    let (ci, cj) = (&mut lo[i], &mut hi[0]);
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Largest singular value squared, by power iteration on `xᵀx`.
pub fn spectral_norm_sq(x: &DenseMatrix) -> f64 {
    let d = x.cols();
    if d == 0 || x.rows() == 0 {
        return 0.0;
    }
    let gram = gemm(&x.transpose(), x).expect("conformable by construction");
    if gram.max_abs() == 0.0 {
        return 0.0;
    }
    // Fixed, non-symmetric start so no eigenvector is systematically missed.
    let mut v: Vec<f64> = (0..d)
        .map(|i| 1.0 + ((i * 7919 + 13) % 101) as f64 / 101.0)
        .collect();
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = gemv(&gram, &v).expect("square gram");
        let rayleigh = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return rayleigh.max(0.0);
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (rayleigh - estimate).abs() <= POWER_REL_TOL * rayleigh.abs() {
            return rayleigh;
        }
        estimate = rayleigh;
    }
    estimate
}

/// Lipschitz constant of the gradient of one task's loss.
///
/// Squared loss `‖xw − y‖²` has gradient Lipschitz constant `2σ_max(x)²`;
/// the logistic loss has `σ_max(x)²/4`.
pub fn lipschitz_bound(x: &DenseMatrix, loss_kind: LossKind) -> Result<f64> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::Argument("lipschitz_bound of empty matrix".into()));
    }
    let sig2 = spectral_norm_sq(x);
    let l = match loss_kind {
        LossKind::Squared => 2.0 * sig2,
        LossKind::Logistic => sig2 / 4.0,
    };
    Ok(l.max(LIPSCHITZ_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_error(m: &DenseMatrix) -> f64 {
        let g = gemm(&m.transpose(), m).unwrap();
        g.sub(&DenseMatrix::identity(g.rows())).unwrap().max_abs()
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let f = thin_svd(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(f.s, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_spectrum_and_signs() {
        let f = thin_svd(&DenseMatrix::from_diag(2, 2, &[3.0, 1.0])).unwrap();
        assert_eq!(f.s, vec![3.0, 1.0]);
        assert_eq!(f.u, DenseMatrix::identity(2));
        assert_eq!(f.q, DenseMatrix::identity(2));
    }

    #[test]
    fn sign_convention_holds() {
        let f = thin_svd(&random(7, 4, 3)).unwrap();
        for k in 0..f.rank() {
            let col = f.u.column(k);
            let mut best = 0;
            for i in 0..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            assert!(col[best] >= 0.0);
        }
    }

    #[test]
    fn wide_and_tall_reconstruct() {
        for &(m, n) in &[(5, 3), (3, 5), (1, 4), (4, 1), (64, 64), (10, 64)] {
            let a = random(m, n, (m * 100 + n) as u64);
            let f = thin_svd(&a).unwrap();
            assert_eq!(f.rank(), m.min(n));
            assert_eq!(f.u.shape(), (m, m.min(n)));
            assert_eq!(f.q.shape(), (n, m.min(n)));
            let err = f.recompose().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm().max(1.0);
            assert!(err <= 1e-8, "{m}x{n}: {err}");
            assert!(orthonormality_error(&f.u) <= 1e-8);
            assert!(orthonormality_error(&f.q) <= 1e-8);
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_deficient_completes_basis() {
        // rank one: outer product
        let a = DenseMatrix::from_fn(5, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 1.0));
        let f = thin_svd(&a).unwrap();
        assert!(f.s[1] < 1e-12 && f.s[2] < 1e-12);
        assert!(orthonormality_error(&f.u) <= 1e-8);
        assert!(f.recompose().sub(&a).unwrap().frobenius_norm() <= 1e-10);

        let z = thin_svd(&DenseMatrix::zeros(3, 2)).unwrap();
        assert_eq!(z.s, vec![0.0, 0.0]);
        assert!(orthonormality_error(&z.u) <= 1e-12);
    }

    #[test]
    fn svd_is_bitwise_deterministic() {
        let a = random(9, 6, 11);
        assert_eq!(thin_svd(&a).unwrap(), thin_svd(&a).unwrap());
    }

    #[test]
    fn products() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(gemv(&a, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(gemv(&DenseMatrix::identity(2), &[5.0, -1.0]).unwrap(), vec![5.0, -1.0]);
        assert_eq!(gemv(&DenseMatrix::zeros(2, 2), &[5.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(gemv_t(&a, &[1.0, 1.0]).unwrap(), vec![4.0, 6.0]);
        let p = gemm(&a, &DenseMatrix::identity(2)).unwrap();
        assert_eq!(p, a);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 3);
        let msg = gemm(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("2x3"), "{msg}");
        assert!(gemv(&a, &[1.0]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let l = lipschitz_bound(&DenseMatrix::identity(2), LossKind::Squared).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
        let x = DenseMatrix::from_diag(2, 2, &[2.0, 1.0]);
        let l = lipschitz_bound(&x, LossKind::Logistic).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        let l = lipschitz_bound(&DenseMatrix::zeros(3, 2), LossKind::Squared).unwrap();
        assert_eq!(l, LIPSCHITZ_FLOOR);
    }

    #[test]
    fn lipschitz_matches_svd() {
        let x = random(10, 4, 42);
        let smax = thin_svd(&x).unwrap().s[0];
        let l = lipschitz_bound(&x, LossKind::Squared).unwrap();
        let expected = 2.0 * smax * smax;
        assert!((l - expected).abs() / expected <= 1e-5);
    }
}
