//! Randomized invariants over the algebra and dictionary layers.

use liesym::liegroup::{GroupKind, MatrixLieGroup};
use liesym::Dictionary;
use nalgebra::DVector;
use proptest::prelude::*;

fn coeff_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0..2.0f64, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn so3_exponentials_are_special_orthogonal(coeffs in coeff_vec(3), t in -2.0..2.0f64) {
        let g = MatrixLieGroup::new(GroupKind::SpecialOrthogonal, 3).unwrap();
        let xi = g.element(DVector::from_vec(coeffs)).unwrap();
        let m = g.exp_map(&xi, t).unwrap();
        let defect = (&m.transpose() * &m - nalgebra::DMatrix::identity(3, 3)).norm();
        prop_assert!(defect < 1e-10, "orthogonality defect {defect}");
        prop_assert!((m.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn algebra_basis_is_frobenius_orthonormal(coeffs in coeff_vec(6)) {
        let g = MatrixLieGroup::new(GroupKind::SpecialEuclidean, 3).unwrap();
        let c = DVector::from_vec(coeffs);
        let xi = g.element(c.clone()).unwrap();
        prop_assert!((xi.matrix.norm() - c.norm()).abs() < 1e-12);
    }

    #[test]
    fn exp_map_inverts_along_the_flow(coeffs in coeff_vec(6), t in -1.5..1.5f64) {
        let g = MatrixLieGroup::new(GroupKind::SpecialEuclidean, 3).unwrap();
        let xi = g.element(DVector::from_vec(coeffs)).unwrap();
        let fwd = g.exp_map(&xi, t).unwrap();
        let bwd = g.exp_map(&xi, -t).unwrap();
        let defect = (&fwd * &bwd - nalgebra::DMatrix::identity(4, 4)).norm();
        prop_assert!(defect < 1e-9, "flow inverse defect {defect}");
    }

    #[test]
    fn model_evaluation_is_linear_in_coefficients(
        a in coeff_vec(10),
        b in coeff_vec(10),
        s in -3.0..3.0f64,
        x in coeff_vec(2),
    ) {
        let dict = Dictionary::polynomial(2, 1, 3).unwrap();
        prop_assert_eq!(dict.len(), 10);
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        let x = DVector::from_vec(x);
        let lhs = dict.evaluate_model(&(&a * s + &b), &x).unwrap();
        let rhs = dict.evaluate_model(&a, &x).unwrap() * s + dict.evaluate_model(&b, &x).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }
}
