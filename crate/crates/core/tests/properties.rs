use cmm_core::operators::{LaplaceOperator, MassKind};
use cmm_core::solver::{project_a_orthonormal, shrink_scalar};
use cmm_core::spectra::{compressed_eigenvalue, flip_mode, order_modes};
use cmm_core::{mesh, DMatrix, FlipMethod, OrderKey, SparseSymmetric};
use proptest::prelude::*;

fn small_op() -> LaplaceOperator {
    LaplaceOperator::assemble(&mesh::generate_lshape(2).unwrap(), MassKind::Unlumped).unwrap()
}

proptest! {
    #[test]
    fn shrink_is_nonexpansive(a in -10.0f64..10.0, b in -10.0f64..10.0, t in 0.0f64..5.0) {
        prop_assert!((shrink_scalar(a, t) - shrink_scalar(b, t)).abs() <= (a - b).abs() + 1e-15);
    }

    #[test]
    fn shrink_is_odd_and_shrinks(z in -10.0f64..10.0, t in 0.0f64..5.0) {
        let x = shrink_scalar(z, t);
        prop_assert_eq!(shrink_scalar(-z, t), -x);
        prop_assert!(x.abs() <= z.abs());
        prop_assert!(x == 0.0 || x.signum() == z.signum());
    }

    #[test]
    fn ordering_is_a_column_permutation(
        entries in prop::collection::vec(-1.0f64..1.0, 21 * 5),
        mu in 0.0f64..0.5,
        dirichlet in any::<bool>(),
    ) {
        let op = small_op();
        let phi = DMatrix::from_vec(21, 5, entries);
        let key = if dirichlet { OrderKey::Dirichlet } else { OrderKey::Compressed };
        let set = order_modes(&phi, &op.weight, mu, key);
        let mut seen = set.permutation.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..5).collect::<Vec<_>>());
        for (r, &j) in set.permutation.iter().enumerate() {
            prop_assert_eq!(set.modes.column(r), phi.column(j));
        }
        let keys = match key {
            OrderKey::Compressed => &set.compressed_eigenvalues,
            OrderKey::Dirichlet => &set.dirichlet_energies,
        };
        prop_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn flip_is_idempotent(
        entries in prop::collection::vec(-1.0f64..1.0, 21),
        integral in any::<bool>(),
    ) {
        let op = small_op();
        let method = if integral { FlipMethod::Integral } else { FlipMethod::Extremum };
        let (once, _) = flip_mode(&entries, method, &op.mass);
        let (twice, flipped_again) = flip_mode(&once, method, &op.mass);
        prop_assert!(!flipped_again);
        prop_assert_eq!(&once, &twice);
        if method == FlipMethod::Extremum {
            let max = once.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = once.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(max + min >= 0.0);
        }
    }

    #[test]
    fn compressed_eigenvalue_is_even(
        entries in prop::collection::vec(-1.0f64..1.0, 21),
        mu in 0.0f64..1.0,
    ) {
        let op = small_op();
        let neg: Vec<f64> = entries.iter().map(|v| -v).collect();
        prop_assert_eq!(
            compressed_eigenvalue(&entries, &op.weight, mu),
            compressed_eigenvalue(&neg, &op.weight, mu)
        );
    }

    #[test]
    fn projection_output_is_a_orthonormal(
        entries in prop::collection::vec(0.0f64..1.0, 21 * 4),
        lumped in any::<bool>(),
    ) {
        let kind = if lumped { MassKind::Lumped } else { MassKind::Unlumped };
        let op = LaplaceOperator::assemble(&mesh::generate_lshape(2).unwrap(), kind).unwrap();
        let y = DMatrix::from_vec(21, 4, entries);
        if let Ok(phi) = project_a_orthonormal(&y, &op.mass) {
            let err = (op.mass.gram(&phi, &phi) - DMatrix::identity(4, 4)).amax();
            prop_assert!(err < 1e-8, "{}", err);
        }
    }

    #[test]
    fn sparse_products_match_dense(
        triplets in prop::collection::vec((0usize..6, 0usize..6, -2.0f64..2.0), 0..20),
        x in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let m = SparseSymmetric::from_upper_triplets(6, &triplets).unwrap();
        let dense = m.to_dense();
        prop_assert!((&dense - dense.transpose()).amax() == 0.0);
        let y = m.mul_vec(&x);
        let yd = &dense * nalgebra_vec(&x);
        for i in 0..6 {
            prop_assert!((y[i] - yd[i]).abs() < 1e-12);
        }
    }
}

fn nalgebra_vec(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(x.len(), 1, x)
}
