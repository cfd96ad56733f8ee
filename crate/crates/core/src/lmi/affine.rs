//! Matrices affine in a vector of scalar decision variables.

use crate::matrix::Matrix;
use std::ops::{Add, Mul, Neg, Sub};

/// `M(v) = constant + sum_i v[i] * coefficient_i`, with coefficients stored
/// sparsely by variable index (sorted, no duplicates).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    pub constant: Matrix,
    pub terms: Vec<(usize, Matrix)>,
}

impl AffineMatrix {
    pub fn constant(m: Matrix) -> Self {
        Self {
            constant: m,
            terms: Vec::new(),
        }
    }

    pub fn zeros(r: usize, c: usize) -> Self {
        Self::constant(Matrix::zeros(r, c))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(Matrix::identity(n, n))
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    fn normalized(mut terms: Vec<(usize, Matrix)>) -> Vec<(usize, Matrix)> {
        terms.sort_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, Matrix)> = Vec::with_capacity(terms.len());
        for (i, m) in terms {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += m,
                _ => out.push((i, m)),
            }
        }
        out.retain(|(_, m)| m.iter().any(|v| *v != 0.0));
        out
    }

    pub fn eval(&self, v: &[f64]) -> Matrix {
        let mut m = self.constant.clone();
        for (i, c) in &self.terms {
            m += c * v[*i];
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self {
            constant: self.constant.transpose(),
            terms: self
                .terms
                .iter()
                .map(|(i, m)| (*i, m.transpose()))
                .collect(),
        }
    }

    /// `L * M(v)`.
    pub fn left_mul(&self, l: &Matrix) -> Self {
        Self {
            constant: l * &self.constant,
            terms: Self::normalized(self.terms.iter().map(|(i, m)| (*i, l * m)).collect()),
        }
    }

    /// `M(v) * R`.
    pub fn right_mul(&self, r: &Matrix) -> Self {
        Self {
            constant: &self.constant * r,
            terms: Self::normalized(self.terms.iter().map(|(i, m)| (*i, m * r)).collect()),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            constant: &self.constant * k,
            terms: Self::normalized(self.terms.iter().map(|(i, m)| (*i, m * k)).collect()),
        }
    }

    /// `M + M^T`.
    pub fn sym(&self) -> Self {
        self + &self.transpose()
    }

    /// Assembles a block matrix. Panics on inconsistent block shapes.
    pub fn block(grid: &[Vec<AffineMatrix>]) -> Self {
        let rows: Vec<usize> = grid.iter().map(|r| r[0].nrows()).collect();
        let cols: Vec<usize> = grid[0].iter().map(|b| b.ncols()).collect();
        for (i, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), cols.len(), "block row {i} length");
            for (j, b) in row.iter().enumerate() {
                assert_eq!(b.shape(), (rows[i], cols[j]), "block ({i},{j}) shape");
            }
        }
        let (nr, nc) = (rows.iter().sum(), cols.iter().sum());
        let mut constant = Matrix::zeros(nr, nc);
        let mut terms: Vec<(usize, Matrix)> = Vec::new();
        let mut r0 = 0;
        for (i, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (j, b) in row.iter().enumerate() {
                constant
                    .view_mut((r0, c0), (rows[i], cols[j]))
                    .copy_from(&b.constant);
                for (k, m) in &b.terms {
                    let mut full = Matrix::zeros(nr, nc);
                    full.view_mut((r0, c0), (rows[i], cols[j])).copy_from(m);
                    terms.push((*k, full));
                }
                c0 += cols[j];
            }
            r0 += rows[i];
        }
        Self {
            constant,
            terms: Self::normalized(terms),
        }
    }

    /// Largest asymmetry over the constant and all coefficients.
    pub fn asymmetry(&self) -> f64 {
        std::iter::once(&self.constant)
            .chain(self.terms.iter().map(|(_, m)| m))
            .map(|m| {
                if m.nrows() != m.ncols() {
                    f64::INFINITY
                } else {
                    (m - m.transpose()).amax()
                }
            })
            .fold(0.0, f64::max)
    }
}

impl Add for &AffineMatrix {
    type Output = AffineMatrix;
    fn add(self, o: &AffineMatrix) -> AffineMatrix {
        assert_eq!(self.shape(), o.shape(), "affine add shape");
        AffineMatrix {
            constant: &self.constant + &o.constant,
            terms: AffineMatrix::normalized(
                self.terms.iter().chain(o.terms.iter()).cloned().collect(),
            ),
        }
    }
}

impl Add for AffineMatrix {
    type Output = AffineMatrix;
    fn add(self, o: AffineMatrix) -> AffineMatrix {
        &self + &o
    }
}

impl Sub for &AffineMatrix {
    type Output = AffineMatrix;
    fn sub(self, o: &AffineMatrix) -> AffineMatrix {
        self + &o.scale(-1.0)
    }
}

impl Sub for AffineMatrix {
    type Output = AffineMatrix;
    fn sub(self, o: AffineMatrix) -> AffineMatrix {
        &self - &o
    }
}

impl Neg for &AffineMatrix {
    type Output = AffineMatrix;
    fn neg(self) -> AffineMatrix {
        self.scale(-1.0)
    }
}

impl Neg for AffineMatrix {
    type Output = AffineMatrix;
    fn neg(self) -> AffineMatrix {
        self.scale(-1.0)
    }
}

/// Constant matrix times affine expression.
impl Mul<&AffineMatrix> for &Matrix {
    type Output = AffineMatrix;
    fn mul(self, a: &AffineMatrix) -> AffineMatrix {
        a.left_mul(self)
    }
}

/// Affine expression times constant matrix.
impl Mul<&Matrix> for &AffineMatrix {
    type Output = AffineMatrix;
    fn mul(self, m: &Matrix) -> AffineMatrix {
        self.right_mul(m)
    }
}
