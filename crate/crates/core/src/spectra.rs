//! Compressed eigenvalues, mode ordering, orientation and the accuracy
//! residual `W phi + (mu/2) sign(phi) - lambda A phi`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::operators::LaplaceOperator;
use crate::sparse::SparseSymmetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderKey {
    /// `phi^T W phi + (mu/2) ||phi||_1`
    #[default]
    Compressed,
    /// `phi^T W phi` only.
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipMethod {
    /// Make `max(phi) + min(phi) >= 0`.
    #[default]
    Extremum,
    /// Make `1^T A phi >= 0`.
    Integral,
    None,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn dirichlet_energy(phi: &[f64], w: &SparseSymmetric) -> f64 {
    w.mul_vec(phi).iter().zip(phi).map(|(a, b)| a * b).sum()
}

pub fn compressed_eigenvalue(phi: &[f64], w: &SparseSymmetric, mu: f64) -> f64 {
    dirichlet_energy(phi, w) + 0.5 * mu * phi.iter().map(|v| v.abs()).sum::<f64>()
}

/// Returns the oriented mode and whether it was negated. A zero key (e.g.
/// `max = -min`) leaves the mode unchanged.
pub fn flip_mode(phi: &[f64], method: FlipMethod, a: &SparseSymmetric) -> (Vec<f64>, bool) {
    let key = match method {
        FlipMethod::None => 0.0,
        FlipMethod::Extremum => {
            let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
            max + min
        }
        FlipMethod::Integral => a.mul_vec(phi).iter().sum(),
    };
    if key < 0.0 {
        (phi.iter().map(|v| -v).collect(), true)
    } else {
        (phi.to_vec(), false)
    }
}

/// Mean over entries of `|W phi + (mu/2) sign(phi) - lambda A phi|` with
/// `sign(0) = 0`.
pub fn accuracy_residual(phi: &[f64], lambda: f64, op: &LaplaceOperator, mu: f64) -> f64 {
    if phi.is_empty() {
        return 0.0;
    }
    let wphi = op.weight.mul_vec(phi);
    let aphi = op.mass.mul_vec(phi);
    let total: f64 = (0..phi.len())
        .map(|i| (wphi[i] + 0.5 * mu * sign(phi[i]) - lambda * aphi[i]).abs())
        .sum();
    total / phi.len() as f64
}

/// `Phi^T W Phi + (mu/2) Phi^T sign(Phi)`; its diagonal holds the
/// compressed eigenvalues.
pub fn lagrangian_readout(phi: &DMatrix<f64>, w: &SparseSymmetric, mu: f64) -> DMatrix<f64> {
    w.gram(phi, phi) + phi.transpose() * phi.map(sign) * (0.5 * mu)
}

/// Per-mode mean-entry residual of `W Phi + (mu/2) sign(Phi) - A Phi Lambda`
/// with the full `K x K` readout `Lambda`. Unlike [`accuracy_residual`] it
/// does not penalize coupling between modes.
pub fn stationarity_residual(phi: &DMatrix<f64>, op: &LaplaceOperator, mu: f64) -> Vec<f64> {
    let n = phi.nrows();
    if n == 0 {
        return alloc::vec![0.0; phi.ncols()];
    }
    let lambda = lagrangian_readout(phi, &op.weight, mu);
    let r = op.weight.mul_mat(phi) + phi.map(sign) * (0.5 * mu) - op.mass.mul_mat(phi) * lambda;
    r.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n as f64)
        .collect()
}

/// Ordered, oriented modes with their per-mode diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    /// `N x K`, columns are modes in order.
    pub modes: DMatrix<f64>,
    pub compressed_eigenvalues: Vec<f64>,
    pub dirichlet_energies: Vec<f64>,
    pub l1_norms: Vec<f64>,
    /// `permutation[rank] = original column`
    pub permutation: Vec<usize>,
    pub flipped: Vec<bool>,
    pub mu: f64,
    pub order: OrderKey,
    pub accuracy: Vec<f64>,
}

impl ModeSet {
    pub fn k(&self) -> usize {
        self.modes.ncols()
    }

    pub fn mode(&self, rank: usize) -> Vec<f64> {
        self.modes.column(rank).iter().copied().collect()
    }

    /// Orients every mode in place; returns the sign applied per column.
    pub fn flip_all(&mut self, method: FlipMethod, a: &SparseSymmetric) -> Vec<f64> {
        let mut signs = Vec::with_capacity(self.k());
        for r in 0..self.k() {
            let (col, flipped) = flip_mode(&self.mode(r), method, a);
            self.modes.set_column(r, &DVector::from_vec(col));
            self.flipped[r] ^= flipped;
            signs.push(if flipped { -1.0 } else { 1.0 });
        }
        signs
    }

    pub fn compute_accuracy(&mut self, op: &LaplaceOperator) {
        self.accuracy = (0..self.k())
            .map(|r| accuracy_residual(&self.mode(r), self.compressed_eigenvalues[r], op, self.mu))
            .collect();
    }

    /// Rows of the eigenvalue table in rank order.
    pub fn table(&self) -> Vec<EigenRow> {
        (0..self.k())
            .map(|r| EigenRow {
                rank: r + 1,
                lambda: self.compressed_eigenvalues[r],
                dirichlet_energy: self.dirichlet_energies[r],
                l1_norm: self.l1_norms[r],
                accuracy_residual: self.accuracy.get(r).copied().unwrap_or(f64::NAN),
                flipped: self.flipped[r],
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub rank: usize,
    pub lambda: f64,
    pub dirichlet_energy: f64,
    pub l1_norm: f64,
    pub accuracy_residual: f64,
    pub flipped: bool,
}

/// Stable ascending sort of the columns of `phi` by `key`; ties keep their
/// original column order.
pub fn order_modes(phi: &DMatrix<f64>, w: &SparseSymmetric, mu: f64, key: OrderKey) -> ModeSet {
    let k = phi.ncols();
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| phi.column(j).iter().copied().collect())
        .collect();
    let dirichlet: Vec<f64> = cols.iter().map(|c| dirichlet_energy(c, w)).collect();
    let l1: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v.abs()).sum())
        .collect();
    let lambda: Vec<f64> = (0..k).map(|j| dirichlet[j] + 0.5 * mu * l1[j]).collect();
    let sort_key = match key {
        OrderKey::Compressed => &lambda,
        OrderKey::Dirichlet => &dirichlet,
    };
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&a, &b| sort_key[a].total_cmp(&sort_key[b]));
    let mut modes = DMatrix::zeros(phi.nrows(), k);
    for (r, &j) in perm.iter().enumerate() {
        modes.set_column(r, &phi.column(j));
    }
    ModeSet {
        modes,
        compressed_eigenvalues: perm.iter().map(|&j| lambda[j]).collect(),
        dirichlet_energies: perm.iter().map(|&j| dirichlet[j]).collect(),
        l1_norms: perm.iter().map(|&j| l1[j]).collect(),
        permutation: perm,
        flipped: alloc::vec![false; k],
        mu,
        order: key,
        accuracy: Vec::new(),
    }
}
