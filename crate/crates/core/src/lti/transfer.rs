//! Matrices of SISO rational functions and their state-space realization.

use super::{LtiError, StateSpaceModel};
use crate::matrix::{Matrix, C64};
use serde::{Deserialize, Serialize};

/// Polynomial with coefficients in descending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn new(coeffs: &[f64]) -> Self {
        Polynomial(coeffs.to_vec())
    }

    /// Drops leading zeros; the zero polynomial becomes `[0]`.
    pub fn trimmed(&self) -> Polynomial {
        let first = self.0.iter().position(|c| *c != 0.0);
        match first {
            Some(k) => Polynomial(self.0[k..].to_vec()),
            None => Polynomial(vec![0.0]),
        }
    }

    pub fn degree(&self) -> usize {
        self.trimmed().0.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    pub fn eval(&self, s: C64) -> C64 {
        self.0
            .iter()
            .fold(C64::new(0.0, 0.0), |acc, c| acc * s + C64::new(*c, 0.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let (a, b) = (self.trimmed().0, other.trimmed().0);
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        Polynomial(out)
    }

    /// Left-pads with zeros to `len` coefficients.
    fn padded(&self, len: usize) -> Vec<f64> {
        let t = self.trimmed().0;
        let mut out = vec![0.0; len.saturating_sub(t.len())];
        out.extend(t);
        out
    }
}

/// One SISO entry `num / den`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalEntry {
    pub num: Polynomial,
    pub den: Polynomial,
}

/// Matrix of SISO rational functions, `entries[row][col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTransfer {
    pub entries: Vec<Vec<RationalEntry>>,
    #[serde(default)]
    pub labels: Option<super::Labels>,
}

impl RationalTransfer {
    pub fn siso(num: &[f64], den: &[f64]) -> Result<Self, LtiError> {
        let t = RationalTransfer {
            entries: vec![vec![RationalEntry {
                num: Polynomial::new(num),
                den: Polynomial::new(den),
            }]],
            labels: None,
        };
        t.validate()?;
        Ok(t)
    }

    /// Diagonal matrix with the same SISO entry repeated `n` times.
    pub fn diagonal(num: &[f64], den: &[f64], n: usize) -> Result<Self, LtiError> {
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| RationalEntry {
                        num: Polynomial::new(if i == j { num } else { &[0.0] }),
                        den: Polynomial::new(if i == j { den } else { &[1.0] }),
                    })
                    .collect()
            })
            .collect();
        let t = RationalTransfer {
            entries,
            labels: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), LtiError> {
        let cols = self.cols();
        for (i, row) in self.entries.iter().enumerate() {
            if row.len() != cols {
                return Err(LtiError::Dimension(format!("transfer row {i} is ragged")));
            }
            for (j, e) in row.iter().enumerate() {
                if e.den.is_zero() {
                    return Err(LtiError::Polynomial(format!(
                        "entry ({i},{j}) has a zero denominator"
                    )));
                }
                if e.num.0.iter().chain(e.den.0.iter()).any(|c| !c.is_finite()) {
                    return Err(LtiError::NonFinite);
                }
                if !e.num.is_zero() && e.num.degree() > e.den.degree() {
                    return Err(LtiError::Improper { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    /// Direct polynomial evaluation at `s`.
    pub fn eval(&self, s: C64) -> Vec<Vec<C64>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|e| e.num.eval(s) / e.den.eval(s)).collect())
            .collect()
    }

    /// Controllable-canonical realization built column by column: each column
    /// shares the product of its distinct denominators.
    pub fn to_state_space(&self) -> Result<StateSpaceModel, LtiError> {
        self.validate()?;
        let (p, m) = (self.rows(), self.cols());
        let mut blocks = Vec::with_capacity(m);
        for j in 0..m {
            blocks.push(self.realize_column(j)?);
        }
        let n: usize = blocks.iter().map(|b| b.0.nrows()).sum();
        let mut a = Matrix::zeros(n, n);
        let mut b = Matrix::zeros(n, m);
        let mut c = Matrix::zeros(p, n);
        let mut d = Matrix::zeros(p, m);
        let mut off = 0;
        for (j, (aj, bj, cj, dj)) in blocks.into_iter().enumerate() {
            let q = aj.nrows();
            a.view_mut((off, off), (q, q)).copy_from(&aj);
            b.view_mut((off, j), (q, 1)).copy_from(&bj);
            c.view_mut((0, off), (p, q)).copy_from(&cj);
            d.view_mut((0, j), (p, 1)).copy_from(&dj);
            off += q;
        }
        let (inputs, outputs) = match &self.labels {
            Some(l) => (l.inputs.clone(), l.outputs.clone()),
            None => (
                (0..m).map(|i| format!("u{i}")).collect(),
                (0..p).map(|i| format!("y{i}")).collect(),
            ),
        };
        StateSpaceModel::with_labels(a, b, c, d, inputs, outputs)
    }

    fn realize_column(&self, j: usize) -> Result<(Matrix, Matrix, Matrix, Matrix), LtiError> {
        let p = self.rows();
        // monic-normalized entries
        let normalized: Vec<(Polynomial, Polynomial)> = (0..p)
            .map(|i| {
                let e = &self.entries[i][j];
                let den = e.den.trimmed();
                let lead = den.0[0];
                (
                    Polynomial(e.num.trimmed().0.iter().map(|c| c / lead).collect()),
                    Polynomial(den.0.iter().map(|c| c / lead).collect()),
                )
            })
            .collect();
        let mut distinct: Vec<Polynomial> = Vec::new();
        for (num, den) in &normalized {
            if num.is_zero() || den.degree() == 0 {
                continue;
            }
            if !distinct.contains(den) {
                distinct.push(den.clone());
            }
        }
        let common = distinct
            .iter()
            .fold(Polynomial(vec![1.0]), |acc, d| acc.mul(d));
        let q = common.degree();
        let mut a = Matrix::zeros(q, q);
        let mut b = Matrix::zeros(q, 1);
        if q > 0 {
            for k in 0..q {
                a[(0, k)] = -common.0[k + 1];
            }
            for k in 1..q {
                a[(k, k - 1)] = 1.0;
            }
            b[(0, 0)] = 1.0;
        }
        let mut c = Matrix::zeros(p, q);
        let mut d = Matrix::zeros(p, 1);
        for (i, (num, den)) in normalized.iter().enumerate() {
            if num.is_zero() {
                continue;
            }
            if den.degree() == 0 {
                // validation guarantees a constant numerator here
                d[(i, 0)] = num.0[0];
                continue;
            }
            // num * (common / den) over common
            let cofactor = distinct
                .iter()
                .filter(|dd| *dd != den)
                .fold(Polynomial(vec![1.0]), |acc, dd| acc.mul(dd));
            let full = num.mul(&cofactor).padded(q + 1);
            let lead = full[0];
            d[(i, 0)] = lead;
            for k in 0..q {
                c[(i, k)] = full[k + 1] - lead * common.0[k + 1];
            }
        }
        Ok((a, b, c, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::frequency_response;
    use crate::matrix::from_rows;

    #[test]
    fn second_order_realization() {
        let s = RationalTransfer::siso(&[1.0], &[1.0, 1.0, 1.0])
            .unwrap()
            .to_state_space()
            .unwrap();
        assert_eq!(s.a, from_rows(&[&[-1.0, -1.0], &[1.0, 0.0]]));
        assert_eq!(s.b, from_rows(&[&[1.0], &[0.0]]));
        // second state is the output, the first its derivative
        assert_eq!(s.c, from_rows(&[&[0.0, 1.0]]));
        assert_eq!(s.d, from_rows(&[&[0.0]]));
    }

    #[test]
    fn constant_weight_has_no_state() {
        let s = RationalTransfer::siso(&[0.01], &[1.0])
            .unwrap()
            .to_state_space()
            .unwrap();
        assert_eq!(s.nstates(), 0);
        assert_eq!(s.d[(0, 0)], 0.01);
    }

    #[test]
    fn lead_weight_dc_value() {
        let s = RationalTransfer::siso(&[1.0, 155.5], &[1.0, 15.24])
            .unwrap()
            .to_state_space()
            .unwrap();
        assert_eq!(s.nstates(), 1);
        let g0 = frequency_response(&s, 0.0).unwrap()[(0, 0)];
        assert!((g0.re - 155.5 / 15.24).abs() < 1e-12 && g0.im.abs() < 1e-15);
    }

    #[test]
    fn improper_entry_rejected() {
        assert!(matches!(
            RationalTransfer::siso(&[1.0, 0.0, 0.0], &[1.0, 1.0]),
            Err(LtiError::Improper { row: 0, col: 0 })
        ));
    }

    #[test]
    fn mimo_realization_matches_polynomial_evaluation() {
        let e = |n: &[f64], d: &[f64]| RationalEntry {
            num: Polynomial::new(n),
            den: Polynomial::new(d),
        };
        let t = RationalTransfer {
            entries: vec![
                vec![e(&[1.0], &[1.0, 1.0, 1.0]), e(&[2.0, 1.0], &[1.0, 3.0])],
                vec![e(&[3.0, 0.5], &[1.0, 2.0]), e(&[0.7], &[1.0])],
                vec![e(&[1.0, 0.0, 2.0], &[2.0, 1.0, 4.0]), e(&[0.0], &[1.0, 5.0])],
            ],
            labels: None,
        };
        let s = t.to_state_space().unwrap();
        for k in 0..30 {
            let w = 10f64.powf(-2.0 + 0.2 * k as f64);
            let g = frequency_response(&s, w).unwrap();
            let h = t.eval(C64::new(0.0, w));
            for i in 0..3 {
                for j in 0..2 {
                    let err = (g[(i, j)] - h[i][j]).norm();
                    assert!(err <= 1e-8 * h[i][j].norm().max(1e-12), "({i},{j}) at {w}");
                }
            }
        }
    }
}
