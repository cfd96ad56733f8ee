use antiwindup::matrix::{
    cholesky_logdet, eigenvalues, is_negative_definite, solve, Matrix, DEFINITENESS_TOL,
};
use proptest::prelude::*;

fn square(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| Matrix::from_vec(n, n, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_closed_under_conjugation(m in (1usize..7).prop_flat_map(square)) {
        let eig = eigenvalues(&m).unwrap();
        prop_assert_eq!(eig.values.len(), m.nrows());
        for z in &eig.values {
            let has_partner = eig.values.iter().any(|w| (w - z.conj()).norm() <= 1e-9 * (1.0 + z.norm()));
            prop_assert!(has_partner);
        }
    }

    #[test]
    fn solve_residual_bounded(a in (1usize..7).prop_flat_map(square), k in 1usize..4) {
        let n = a.nrows();
        let b = Matrix::from_fn(n, k, |i, j| (i as f64 + 1.0) * 0.3 - j as f64);
        if let Ok(x) = solve(&a, &b) {
            let cond = a.norm() * solve(&a, &Matrix::identity(n, n)).unwrap().norm();
            let res = (&a * &x - &b).norm();
            prop_assert!(res <= 1e-13 * cond * b.norm().max(1.0));
        }
    }

    #[test]
    fn definiteness_invariant_under_congruence(
        g in (1usize..5).prop_flat_map(square),
        shift in -3.0f64..3.0,
    ) {
        let n = g.nrows();
        let m = -(g.transpose() * &g) + Matrix::identity(n, n) * shift;
        let t = Matrix::identity(n, n) * 2.0 + Matrix::from_fn(n, n, |i, j| 0.1 * (i as f64 - j as f64));
        let mt = t.transpose() * &m * &t;
        let base = antiwindup::matrix::max_symmetric_eigenvalue(&m).unwrap();
        // skip borderline cases where eigenvalue rounding decides the answer
        prop_assume!(base.abs() > 1e-3);
        prop_assert_eq!(
            is_negative_definite(&m, DEFINITENESS_TOL).unwrap(),
            is_negative_definite(&antiwindup::matrix::symmetrize(&mt), DEFINITENESS_TOL).unwrap()
        );
    }

    #[test]
    fn cholesky_succeeds_iff_positive_spectrum(g in (1usize..6).prop_flat_map(square)) {
        let m = antiwindup::matrix::symmetrize(&g);
        let lmin = antiwindup::matrix::min_symmetric_eigenvalue(&m).unwrap();
        prop_assume!(lmin.abs() > 1e-8);
        prop_assert_eq!(cholesky_logdet(&m).is_ok(), lmin > 0.0);
    }
}
