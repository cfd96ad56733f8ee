//! Lyapunov equations and balanced truncation for oversized interconnects.

use super::{is_hurwitz, LtiError, StateSpaceModel};
use crate::matrix::{inverse, symmetrize, Matrix};
use nalgebra::linalg::SymmetricEigen;

/// Interconnects above this many states are candidates for reduction.
pub const REDUCTION_STATE_THRESHOLD: usize = 60;

/// Solves `A X + X A^T + Q = 0` for Hurwitz `A` with the matrix-sign iteration.
pub fn lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix, LtiError> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(LtiError::Dimension("lyapunov: shapes".into()));
    }
    let mut ak = a.clone();
    let mut qk = q.clone();
    for _ in 0..100 {
        let inv = inverse(&ak)?;
        // determinant scaling accelerates the early iterations
        let det = ak.determinant().abs();
        let c = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / n as f64)
        } else {
            1.0
        };
        let next_a = (&ak * c + &inv / c) * 0.5;
        let next_q = (&qk * c + &inv * &qk * inv.transpose() / c) * 0.5;
        let delta = (&next_a - &ak).norm();
        ak = next_a;
        qk = next_q;
        if delta <= 1e-13 * ak.norm() {
            break;
        }
    }
    if (&ak + Matrix::identity(n, n)).norm() > 1e-8 * (n as f64).sqrt() {
        return Err(LtiError::Unstable);
    }
    Ok(symmetrize(&(qk * 0.5)))
}

// Factor L with W = L L^T for a positive semidefinite Gramian.
fn psd_sqrt(w: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new(symmetrize(w));
    let root = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * Matrix::from_diagonal(&root)
}

/// Square-root balanced truncation keeping Hankel singular values above
/// `tol` times the largest.
pub fn balanced_truncation(s: &StateSpaceModel, tol: f64) -> Result<StateSpaceModel, LtiError> {
    let n = s.nstates();
    if n == 0 {
        return Ok(s.clone());
    }
    if !is_hurwitz(s, 0.0) {
        return Err(LtiError::Unstable);
    }
    let wc = lyapunov(&s.a, &(&s.b * s.b.transpose()))?;
    let wo = lyapunov(&s.a.transpose(), &(s.c.transpose() * &s.c))?;
    let lc = psd_sqrt(&wc);
    let lo = psd_sqrt(&wo);
    let svd = (lo.transpose() * &lc).svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sig = svd.singular_values;
    let smax = sig.iter().copied().fold(0.0, f64::max);
    let r = sig.iter().filter(|v| **v > tol * smax).count().max(1);
    if smax == 0.0 {
        return Err(LtiError::Dimension("balanced truncation of a zero system".into()));
    }
    let scale = Matrix::from_diagonal(&sig.rows(0, r).map(|v| 1.0 / v.sqrt()));
    let t = &lc * vt.rows(0, r).transpose() * &scale;
    let ti = &scale * u.columns(0, r).transpose() * lo.transpose();
    StateSpaceModel::with_labels(
        &ti * &s.a * &t,
        &ti * &s.b,
        &s.c * &t,
        s.d.clone(),
        s.input_labels.clone(),
        s.output_labels.clone(),
    )
}

/// Applies [`balanced_truncation`] when the model exceeds
/// [`REDUCTION_STATE_THRESHOLD`] states and is stable; otherwise returns it
/// unchanged.
pub fn reduce_if_large(s: &StateSpaceModel, tol: f64) -> StateSpaceModel {
    if s.nstates() <= REDUCTION_STATE_THRESHOLD {
        return s.clone();
    }
    balanced_truncation(s, tol).unwrap_or_else(|_| s.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{frequency_response, series, RationalTransfer};
    use crate::matrix::from_rows;

    #[test]
    fn lyapunov_residual() {
        let a = from_rows(&[&[-1.0, -1.0], &[1.0, 0.0]]);
        let q = Matrix::identity(2, 2);
        let x = lyapunov(&a, &q).unwrap();
        assert!((&a * &x + &x * a.transpose() + &q).norm() < 1e-12);
    }

    #[test]
    fn truncation_drops_cancelled_mode() {
        let g = RationalTransfer::siso(&[1.0], &[1.0, 1.0, 1.0])
            .unwrap()
            .to_state_space()
            .unwrap();
        // (s+2)/(s+2) in series adds an unobservable/uncontrollable-ish mode
        let canc = RationalTransfer::siso(&[1.0, 2.0], &[1.0, 2.0])
            .unwrap()
            .to_state_space()
            .unwrap();
        let big = series(&g, &canc).unwrap();
        assert_eq!(big.nstates(), 3);
        let red = balanced_truncation(&big, 1e-9).unwrap();
        assert_eq!(red.nstates(), 2);
        for w in [0.0, 0.3, 1.0, 5.0] {
            let e = (frequency_response(&red, w).unwrap() - frequency_response(&g, w).unwrap()).norm();
            assert!(e < 1e-7);
        }
    }
}
