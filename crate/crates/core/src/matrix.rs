//! Dense real linear algebra shared by every other module.
//!
//! Matrices are plain `nalgebra::DMatrix<f64>`; this module adds the handful of
//! checked operations the rest of the crate relies on (spectra, definiteness
//! tests, guarded linear solves and log-determinants).

use nalgebra::linalg::{Cholesky, Schur, SymmetricEigen};
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex<f64>>;
pub type C64 = Complex<f64>;

/// Relative symmetry tolerance applied as `SYMMETRY_TOL * max(1, ||M||)`.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Default margin for strict definiteness decisions.
pub const DEFINITENESS_TOL: f64 = 1e-8;
/// Matrices with a 1-norm condition estimate above this are treated as singular.
pub const SINGULAR_COND: f64 = 1e14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("eigenvalue iteration did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },
    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e} exceeds {tolerance:.3e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },
    #[error("matrix is numerically singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Spectrum of a real square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<C64>,
    pub converged: bool,
}

impl EigenResult {
    /// Largest real part (spectral abscissa). `-inf` for an empty spectrum.
    pub fn abscissa(&self) -> f64 {
        self.values
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Eigenvalues ordered by (real, imaginary) part.
    pub fn sorted(&self) -> Vec<C64> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
        });
        v
    }
}

fn check_finite(m: &Matrix) -> Result<(), LinalgError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

fn check_square(m: &Matrix) -> Result<usize, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// All eigenvalues of a real square matrix via Hessenberg reduction and
/// shifted QR. Complex eigenvalues come back as exact conjugate pairs.
pub fn eigenvalues(m: &Matrix) -> Result<EigenResult, LinalgError> {
    let n = check_square(m)?;
    check_finite(m)?;
    if n == 0 {
        return Ok(EigenResult {
            values: Vec::new(),
            converged: true,
        });
    }
    let max_iter = 100 * n.max(1);
    // Shifted QR can stall on matrices with many repeated eigenvalues (e.g.
    // Hamiltonians of non-minimal realizations); retry on a balanced copy
    // and then on an orthogonally rotated one, both similarity transforms.
    let attempts = [m.clone(), balance(m), reflect(&balance(m))];
    for a in attempts {
        let Some(schur) = Schur::try_new(a, f64::EPSILON, max_iter) else {
            continue;
        };
        let values: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
        if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Ok(EigenResult {
                values: conjugate_symmetrize(values),
                converged: true,
            });
        }
    }
    Err(LinalgError::NoConvergence { max_iter })
}

/// Parlett-Reinsch balancing `D^-1 M D` with powers of two, so the
/// eigenvalues are unchanged up to rounding of the original entries.
fn balance(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let mut a = m.clone();
    let radix = 2.0f64;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let c: f64 = (0..n).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let r: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut c, mut g) = (c, r / radix);
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r / f) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    a
}

/// `H M H` with the Householder reflection along `(1, 2, ..., n)`.
fn reflect(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let v = nalgebra::DVector::from_fn(n, |i, _| (i + 1) as f64);
    let h = Matrix::identity(n, n) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    &h * m * &h
}

// 2x2 Schur blocks already yield conjugate pairs; this only removes rounding
// asymmetry so that downstream set comparisons are exact.
fn conjugate_symmetrize(mut values: Vec<C64>) -> Vec<C64> {
    let n = values.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || values[i].im == 0.0 {
            continue;
        }
        let target = values[i].conj();
        let partner = (0..n)
            .filter(|&j| j != i && !used[j])
            .min_by(|&a, &b| {
                (values[a] - target)
                    .norm()
                    .partial_cmp(&(values[b] - target).norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        if let Some(j) = partner {
            let re = 0.5 * (values[i].re + values[j].re);
            let im = 0.5 * (values[i].im.abs() + values[j].im.abs());
            let sign = values[i].im.signum();
            values[i] = C64::new(re, sign * im);
            values[j] = C64::new(re, -sign * im);
            used[i] = true;
            used[j] = true;
        }
    }
    values
}

/// Frobenius-norm asymmetry check used by every symmetric routine.
pub fn check_symmetric(m: &Matrix) -> Result<(), LinalgError> {
    check_square(m)?;
    let asym = (m - m.transpose()).norm();
    let tol = SYMMETRY_TOL * m.norm().max(1.0);
    if asym > tol {
        return Err(LinalgError::NotSymmetric {
            asymmetry: asym,
            tolerance: tol,
        });
    }
    Ok(())
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue of a symmetric matrix (`-inf` for empty input).
pub fn max_symmetric_eigenvalue(m: &Matrix) -> Result<f64, LinalgError> {
    check_symmetric(m)?;
    check_finite(m)?;
    if m.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    Ok(eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for empty input).
pub fn min_symmetric_eigenvalue(m: &Matrix) -> Result<f64, LinalgError> {
    check_symmetric(m)?;
    check_finite(m)?;
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// True iff the largest eigenvalue of the symmetric matrix is below `-tol`.
pub fn is_negative_definite(m: &Matrix, tol: f64) -> Result<bool, LinalgError> {
    Ok(max_symmetric_eigenvalue(m)? < -tol)
}

/// True iff the smallest eigenvalue of the symmetric matrix exceeds `tol`.
pub fn is_positive_definite(m: &Matrix, tol: f64) -> Result<bool, LinalgError> {
    Ok(min_symmetric_eigenvalue(m)? > tol)
}

fn one_norm(m: &Matrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A X = B` by partial-pivot LU, refusing numerically singular `A`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    let n = check_square(a)?;
    if b.nrows() != n {
        return Err(LinalgError::Dimension(format!(
            "solve: A is {n}x{n} but B has {} rows",
            b.nrows()
        )));
    }
    check_finite(a)?;
    check_finite(b)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or(LinalgError::Singular {
        condition: f64::INFINITY,
    })?;
    let condition = one_norm(a) * one_norm(&inv);
    if !condition.is_finite() || condition > SINGULAR_COND {
        return Err(LinalgError::Singular { condition });
    }
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or(LinalgError::Singular { condition })?;
    check_finite(&x).map_err(|_| LinalgError::Singular { condition })?;
    Ok(x)
}

/// Inverse with the same singularity guard as [`solve`].
pub fn inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    let n = check_square(a)?;
    solve(a, &Matrix::identity(n, n))
}

/// Cholesky factor `L` (lower triangular, `M = L L^T`) and `ln det M`.
pub fn cholesky_logdet(m: &Matrix) -> Result<(Matrix, f64), LinalgError> {
    check_symmetric(m)?;
    check_finite(m)?;
    let chol = Cholesky::new(symmetrize(m)).ok_or(LinalgError::NotPositiveDefinite)?;
    let l = chol.unpack();
    let logdet = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return Err(LinalgError::NotPositiveDefinite);
    }
    Ok((l, logdet))
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Assembles a matrix from a grid of blocks. Every block in a row must share
/// its row count and every block in a column its column count.
pub fn block(grid: &[Vec<Matrix>]) -> Result<Matrix, LinalgError> {
    if grid.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    let ncols = grid[0].len();
    let row_sizes: Vec<usize> = grid
        .iter()
        .map(|row| row.first().map(|b| b.nrows()).unwrap_or(0))
        .collect();
    let col_sizes: Vec<usize> = (0..ncols).map(|j| grid[0][j].ncols()).collect();
    for (i, row) in grid.iter().enumerate() {
        if row.len() != ncols {
            return Err(LinalgError::Dimension(format!(
                "block row {i} has {} blocks, expected {ncols}",
                row.len()
            )));
        }
        for (j, b) in row.iter().enumerate() {
            if b.nrows() != row_sizes[i] || b.ncols() != col_sizes[j] {
                return Err(LinalgError::Dimension(format!(
                    "block ({i},{j}) is {}x{}, expected {}x{}",
                    b.nrows(),
                    b.ncols(),
                    row_sizes[i],
                    col_sizes[j]
                )));
            }
        }
    }
    let mut out = Matrix::zeros(row_sizes.iter().sum(), col_sizes.iter().sum());
    let mut r = 0;
    for (i, row) in grid.iter().enumerate() {
        let mut c = 0;
        for (j, b) in row.iter().enumerate() {
            out.view_mut((r, c), (row_sizes[i], col_sizes[j])).copy_from(b);
            c += col_sizes[j];
        }
        r += row_sizes[i];
    }
    Ok(out)
}

/// Row-major construction helper; panics on a ragged or empty literal.
pub fn from_rows(rows: &[&[f64]]) -> Matrix {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    assert!(rows.iter().all(|row| row.len() == c), "ragged matrix literal");
    Matrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Largest singular value of a complex matrix.
pub fn max_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Largest singular value of a real matrix.
pub fn max_singular_value_real(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Serde adapter writing a matrix as an array of rows.
pub mod rows_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let c = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(Matrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
    }
}
