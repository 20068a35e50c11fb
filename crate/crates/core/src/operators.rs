//! Discrete Laplace-Beltrami operator `L = A^{-1} W`: cotangent weights,
//! Galerkin and lumped mass matrices, and a dense generalized eigensolver.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::eigen::symmetric_eigen;
use crate::error::{CmmError, Result};
use crate::geom::{cross, dot, norm, sub};
use crate::mesh::TriangleMesh;
use crate::sparse::SparseSymmetric;

/// Any angle whose cotangent exceeds this in magnitude is treated as degenerate.
pub const MAX_COTANGENT: f64 = 1e8;

/// Default size limit for [`generalized_eigs`].
pub const DENSE_EIG_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassKind {
    /// Row sums of the Galerkin mass on the diagonal (one third of the
    /// incident triangle area per vertex).
    #[default]
    Lumped,
    /// Piecewise-linear Galerkin mass.
    Unlumped,
}

/// The pair `(W, A)` with `L = A^{-1} W`.
#[derive(Debug, Clone)]
pub struct LaplaceOperator {
    pub weight: SparseSymmetric,
    pub mass: SparseSymmetric,
    pub mass_kind: MassKind,
}

impl LaplaceOperator {
    pub fn assemble(mesh: &TriangleMesh, mass_kind: MassKind) -> Result<Self> {
        Ok(Self {
            weight: assemble_cotan_weights(mesh)?,
            mass: assemble_mass(mesh, mass_kind),
            mass_kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.weight.dim()
    }
}

/// Positive semidefinite cotangent matrix: `W_ij = -(cot a_ij + cot b_ij)/2`
/// for each edge, `W_ii = -sum_j W_ij`. Boundary edges get a single term.
pub fn assemble_cotan_weights(mesh: &TriangleMesh) -> Result<SparseSymmetric> {
    let pos = mesh.positions();
    let mut trip = Vec::with_capacity(mesh.n_faces() * 12);
    for (fi, face) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let (o, i, j) = (face[k], face[(k + 1) % 3], face[(k + 2) % 3]);
            let e1 = sub(&pos[i], &pos[o]);
            let e2 = sub(&pos[j], &pos[o]);
            let cot = dot(&e1, &e2) / norm(&cross(&e1, &e2));
            if !(cot.abs() <= MAX_COTANGENT) {
                return Err(CmmError::DegenerateTriangle { face: fi, cot });
            }
            let w = 0.5 * cot;
            trip.push((i, j, -w));
            trip.push((j, i, -w));
            trip.push((i, i, w));
            trip.push((j, j, w));
        }
    }
    SparseSymmetric::from_triplets(mesh.n_vertices(), trip)
}

/// Galerkin P1 mass (`T/6` on the diagonal, `T/12` off it, per triangle of
/// area `T`) or its row-lumped diagonal.
pub fn assemble_mass(mesh: &TriangleMesh, kind: MassKind) -> SparseSymmetric {
    let n = mesh.n_vertices();
    match kind {
        MassKind::Unlumped => {
            let mut trip = Vec::with_capacity(mesh.n_faces() * 9);
            for (fi, face) in mesh.faces().iter().enumerate() {
                let area = mesh.face_area(fi);
                for &a in face {
                    for &b in face {
                        trip.push((a, b, if a == b { area / 6.0 } else { area / 12.0 }));
                    }
                }
            }
            SparseSymmetric::from_triplets(n, trip).expect("element mass is symmetric")
        }
        MassKind::Lumped => {
            let mut diag = alloc::vec![0.0; n];
            for (fi, face) in mesh.faces().iter().enumerate() {
                let third = mesh.face_area(fi) / 3.0;
                for &a in face {
                    diag[a] += third;
                }
            }
            SparseSymmetric::from_diagonal(&diag)
        }
    }
}

/// The `k` smallest eigenpairs of `W x = lambda A x`, eigenvalues ascending,
/// eigenvectors A-orthonormal. Each eigenvector is signed so that its
/// largest-magnitude entry is positive.
pub fn generalized_eigs(
    w: &SparseSymmetric,
    a: &SparseSymmetric,
    k: usize,
    cap: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = w.dim();
    if a.dim() != n {
        return Err(CmmError::Shape("W and A differ in dimension".into()));
    }
    if n > cap {
        return Err(CmmError::TooLarge { n, cap });
    }
    if k == 0 || k > n {
        return Err(CmmError::Config {
            field: "k",
            reason: alloc::format!("requested {k} eigenpairs of a {n}x{n} problem"),
        });
    }
    let chol = Cholesky::new(a.to_dense()).ok_or(CmmError::NotPositiveDefinite {
        pivot: 0,
        value: f64::NAN,
    })?;
    let l = chol.l();
    // C = L^{-1} W L^{-T}
    let x = l
        .solve_lower_triangular(&w.to_dense())
        .expect("Cholesky factor has a positive diagonal");
    let c = l
        .solve_lower_triangular(&x.transpose())
        .expect("Cholesky factor has a positive diagonal");
    let (mut values, vectors) = symmetric_eigen(&c);
    values.truncate(k);
    let v = vectors.columns(0, k).into_owned();
    let mut phi = l
        .transpose()
        .solve_upper_triangular(&v)
        .expect("Cholesky factor has a positive diagonal");
    for mut col in phi.column_iter_mut() {
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    Ok((values, phi))
}
