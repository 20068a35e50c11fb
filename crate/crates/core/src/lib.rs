//! Compressed manifold modes: sparse, locally supported analogues of
//! Laplace-Beltrami eigenfunctions on triangle meshes.
//!
//! The crate is `no_std` (it needs `alloc`). It covers mesh validation and
//! generation ([`mesh`]), operator assembly and a dense generalized
//! eigensolver ([`operators`]), the ADMM iteration ([`solver`]), its
//! accelerated restart variant and the solve driver ([`acceleration`]), and
//! the spectral readout of the result ([`spectra`]).
//!
//! ```
//! use cmm_core::{mesh, operators::{LaplaceOperator, MassKind}, solver::SolveConfig};
//!
//! let mesh = mesh::generate_lshape(2).unwrap();
//! let op = LaplaceOperator::assemble(&mesh, MassKind::Lumped).unwrap();
//! let cfg = SolveConfig { k: 2, mu: 0.02, seed: 1, max_iter: 200, ..SolveConfig::default() };
//! let out = cmm_core::solve(&op, &cfg).unwrap();
//! assert_eq!(out.modes.k(), 2);
//! ```

#![no_std]
// NaN-rejecting `!(x > 0.0)` checks are intentional
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acceleration;
pub mod cholesky;
pub mod eigen;
pub mod error;
mod geom;
pub mod mesh;
pub mod operators;
pub mod solver;
pub mod sparse;
pub mod spectra;

pub use acceleration::{
    solve, solve_from, ConvergenceTrace, SolveOutput, Termination, TraceRecord,
};
pub use error::{CmmError, Result};
pub use mesh::TriangleMesh;
pub use operators::{LaplaceOperator, MassKind};
pub use solver::{AdmmState, SolveConfig, Variant};
pub use sparse::SparseSymmetric;
pub use spectra::{FlipMethod, ModeSet, OrderKey};

pub use nalgebra::DMatrix;
