//! Symmetric sparse matrices in compressed-row form with both triangles stored.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{CmmError, Result};

/// A structurally and numerically symmetric sparse matrix.
///
/// Both triangles are stored explicitly in CSR layout with sorted column
/// indices; explicit zeros are dropped when the matrix is built.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    /// Sums duplicate triplets. Each off-diagonal contribution must be given
    /// once per ordered pair, i.e. `(i, j, v)` and `(j, i, v)` both appear.
    /// Use [`SparseSymmetric::from_upper_triplets`] to mirror automatically.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, _) in &triplets {
            if i >= dim || j >= dim {
                return Err(CmmError::Shape(alloc::format!(
                    "entry ({i}, {j}) outside {dim}x{dim}"
                )));
            }
        }
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = alloc::vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((i, j, mut v)) = iter.next() {
            while let Some(&(i2, j2, v2)) = iter.peek() {
                if (i2, j2) != (i, j) {
                    break;
                }
                v += v2;
                iter.next();
            }
            if v != 0.0 {
                rows.push(i);
                cols.push(j);
                vals.push(v);
            }
        }
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let m = Self {
            dim,
            row_ptr,
            cols,
            vals,
        };
        m.check_symmetric()?;
        Ok(m)
    }

    /// Treats `(i, j)` and `(j, i)` as the same entry: duplicates are summed
    /// once in the upper triangle and the sum is mirrored.
    pub fn from_upper_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in triplets {
            *upper.entry((i.min(j), i.max(j))).or_insert(0.0) += v;
        }
        let mut full = Vec::with_capacity(2 * upper.len());
        for (&(i, j), &v) in &upper {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::from_triplets(dim, full)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let trip = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), trip).expect("diagonal is symmetric")
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CmmError::Shape("matrix is not square".into()));
        }
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), trip)
    }

    fn check_symmetric(&self) -> Result<()> {
        for (i, j, v) in self.iter() {
            if i < j && self.get(j, i) != v {
                return Err(CmmError::Shape(alloc::format!(
                    "entry ({i}, {j}) = {v} has no matching ({j}, {i})"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.iter().all(|(i, j, _)| i == j)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `self * x` for a dense `N x K` block.
    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, x.ncols());
        for k in 0..x.ncols() {
            let col = x.column(k);
            for i in 0..self.dim {
                let (cols, vals) = self.row(i);
                out[(i, k)] = cols.iter().zip(vals).map(|(&j, &v)| v * col[j]).sum();
            }
        }
        out
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(CmmError::Shape("dimension mismatch".into()));
        }
        let trip = self
            .iter()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(other.iter().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Self::from_triplets(self.dim, trip)
    }

    /// Diagonal matrix of row sums.
    pub fn lumped(&self) -> Self {
        Self::from_diagonal(&self.row_sums())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    /// `sum_ij x_ik * self_ij * y_jk` for every column pair `(k, k)`, i.e. the
    /// diagonal of `X^T M Y`.
    pub fn column_forms(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
        let my = self.mul_mat(y);
        (0..x.ncols())
            .map(|k| x.column(k).dot(&my.column(k)))
            .collect()
    }

    /// `X^T M Y`.
    pub fn gram(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        x.transpose() * self.mul_mat(y)
    }
}
