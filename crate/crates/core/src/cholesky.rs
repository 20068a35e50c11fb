//! Envelope (skyline) Cholesky factorization with reverse Cuthill-McKee
//! ordering. Mesh matrices have a bandwidth of roughly `sqrt(N)` after RCM,
//! which keeps the envelope small at the sizes this crate targets.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{CmmError, Result};
use crate::sparse::SparseSymmetric;

/// `P M P^T = L L^T` with `L` stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// first stored column of each row of `L`
    first: Vec<usize>,
    /// offset of row `i`'s slice `first[i]..=i` in `data`
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(m: &SparseSymmetric) -> Result<Self> {
        let n = m.dim();
        let perm = reverse_cuthill_mckee(m);
        let mut inv = alloc::vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            let (cols, _) = m.row(old);
            for &c in cols {
                first[new] = first[new].min(inv[c]);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut len = 0;
        for i in 0..n {
            offset.push(len);
            len += i - first[i] + 1;
        }
        offset.push(len);
        let mut data = alloc::vec![0.0; len];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = m.row(old);
            for (&c, &v) in cols.iter().zip(vals) {
                let j = inv[c];
                if j <= new {
                    data[offset[new] + j - first[new]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = data[offset[i] + j - fi];
                for k in start..j {
                    s -= data[offset[i] + k - fi] * data[offset[j] + k - fj];
                }
                data[offset[i] + j - fi] = s / data[offset[j] + j - fj];
            }
            let mut d = data[offset[i] + i - fi];
            for k in fi..i {
                let l = data[offset[i] + k - fi];
                d -= l * l;
            }
            if !(d > 0.0) {
                return Err(CmmError::NotPositiveDefinite {
                    pivot: perm[i],
                    value: d,
                });
            }
            data[offset[i] + i - fi] = libm::sqrt(d);
        }
        Ok(Self {
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor's envelope.
    pub fn envelope_len(&self) -> usize {
        self.data.len()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[self.offset[i] + j - self.first[i]]
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.entry(i, k) * y[k];
            }
            y[i] = s / self.entry(i, i);
        }
        for i in (0..n).rev() {
            y[i] /= self.entry(i, i);
            let xi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.entry(i, k) * xi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }

    /// Solves `M X = B` column by column.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        x
    }
}

/// Reverse Cuthill-McKee ordering; returns `perm[new] = old`. Each connected
/// component starts from a pseudo-peripheral vertex.
pub fn reverse_cuthill_mckee(m: &SparseSymmetric) -> Vec<usize> {
    let n = m.dim();
    let degree: Vec<usize> = (0..n).map(|i| m.row(i).0.len()).collect();
    let mut visited = alloc::vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(m, seed, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = m
                .row(v)
                .0
                .iter()
                .copied()
                .filter(|&u| !visited[u])
                .collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(m: &SparseSymmetric, start: usize) -> Vec<Vec<usize>> {
    let mut seen = alloc::collections::BTreeSet::from([start]);
    let mut levels = alloc::vec![alloc::vec![start]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &u in m.row(v).0 {
                if seen.insert(u) {
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

fn pseudo_peripheral(m: &SparseSymmetric, seed: usize, degree: &[usize]) -> usize {
    let mut v = seed;
    let mut depth = bfs_levels(m, v).len();
    loop {
        let levels = bfs_levels(m, v);
        let candidate = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&u| (degree[u], u))
            .unwrap();
        let cand_depth = bfs_levels(m, candidate).len();
        if cand_depth > depth {
            v = candidate;
            depth = cand_depth;
        } else {
            return v;
        }
    }
}
