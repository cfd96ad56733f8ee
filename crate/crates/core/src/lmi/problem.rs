//! LMI problem container and a log-det barrier interior-point solver.

use super::affine::AffineMatrix;
use super::LmiError;
use crate::matrix::{max_symmetric_eigenvalue, symmetrize, to_rows, Matrix};
use nalgebra::linalg::Cholesky;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Symmetric,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub kind: VarKind,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `expr < 0`
    NegativeDefinite,
    /// `expr > 0`
    PositiveDefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: AffineMatrix,
    pub sense: Sense,
}

impl Constraint {
    /// The constraint rewritten as `F(v) < 0`.
    pub fn as_negative(&self) -> AffineMatrix {
        match self.sense {
            Sense::NegativeDefinite => self.expr.clone(),
            Sense::PositiveDefinite => -&self.expr,
        }
    }
}

/// Strict LMIs in scalar decision variables with an optional linear objective.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LmiProblem {
    pub vars: Vec<VarBlock>,
    pub constraints: Vec<Constraint>,
    /// Linear objective coefficients (minimized); empty for feasibility.
    pub objective: Vec<f64>,
    nvars: usize,
}

impl LmiProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    fn push_block(&mut self, name: &str, kind: VarKind, rows: usize, cols: usize, len: usize) -> usize {
        let offset = self.nvars;
        self.vars.push(VarBlock {
            name: name.to_string(),
            kind,
            rows,
            cols,
            offset,
            len,
        });
        self.nvars += len;
        offset
    }

    /// Symmetric `n x n` matrix variable.
    pub fn symmetric(&mut self, name: &str, n: usize) -> AffineMatrix {
        let offset = self.push_block(name, VarKind::Symmetric, n, n, n * (n + 1) / 2);
        let mut terms = Vec::new();
        let mut k = offset;
        for j in 0..n {
            for i in j..n {
                let mut m = Matrix::zeros(n, n);
                m[(i, j)] = 1.0;
                m[(j, i)] = 1.0;
                terms.push((k, m));
                k += 1;
            }
        }
        AffineMatrix {
            constant: Matrix::zeros(n, n),
            terms,
        }
    }

    /// Unstructured `r x c` matrix variable.
    pub fn full(&mut self, name: &str, r: usize, c: usize) -> AffineMatrix {
        let offset = self.push_block(name, VarKind::Full, r, c, r * c);
        let mut terms = Vec::new();
        for j in 0..c {
            for i in 0..r {
                let mut m = Matrix::zeros(r, c);
                m[(i, j)] = 1.0;
                terms.push((offset + j * r + i, m));
            }
        }
        AffineMatrix {
            constant: Matrix::zeros(r, c),
            terms,
        }
    }

    pub fn scalar(&mut self, name: &str) -> AffineMatrix {
        self.full(name, 1, 1)
    }

    fn add(&mut self, name: &str, expr: AffineMatrix, sense: Sense) -> Result<(), LmiError> {
        if expr.nrows() != expr.ncols() {
            return Err(LmiError::Dimension(format!("constraint {name} is not square")));
        }
        let scale = expr.constant.amax().max(1.0);
        if expr.asymmetry() > 1e-12 * scale {
            return Err(LmiError::NotSymmetric(name.to_string()));
        }
        if expr.terms.iter().any(|(i, _)| *i >= self.nvars) {
            return Err(LmiError::Dimension(format!("constraint {name} uses undeclared variables")));
        }
        self.constraints.push(Constraint {
            name: name.to_string(),
            expr,
            sense,
        });
        Ok(())
    }

    /// Adds `expr < 0`.
    pub fn less_than_zero(&mut self, name: &str, expr: AffineMatrix) -> Result<(), LmiError> {
        self.add(name, expr, Sense::NegativeDefinite)
    }

    /// Adds `expr > 0`.
    pub fn greater_than_zero(&mut self, name: &str, expr: AffineMatrix) -> Result<(), LmiError> {
        self.add(name, expr, Sense::PositiveDefinite)
    }

    /// Minimizes a 1x1 affine expression (its constant part is ignored).
    pub fn minimize(&mut self, expr: &AffineMatrix) -> Result<(), LmiError> {
        if expr.shape() != (1, 1) {
            return Err(LmiError::Dimension("objective must be scalar".into()));
        }
        let mut c = vec![0.0; self.nvars];
        for (i, m) in &expr.terms {
            c[*i] += m[(0, 0)];
        }
        self.objective = c;
        Ok(())
    }

    /// Substitutes a fixed value for a named block: its coefficients move into
    /// the constants and the scalar variables become unused.
    pub fn fix(&mut self, name: &str, value: &Matrix) -> Result<(), LmiError> {
        let b = self
            .block(name)
            .ok_or_else(|| LmiError::Parameter(format!("unknown variable {name}")))?
            .clone();
        if value.shape() != (b.rows, b.cols) {
            return Err(LmiError::Dimension(format!("value for {name}")));
        }
        let mut x = vec![0.0; self.nvars];
        // Coordinates of `value` in this block's basis.
        match b.kind {
            VarKind::Symmetric => {
                let mut k = b.offset;
                for j in 0..b.cols {
                    for i in j..b.rows {
                        x[k] = value[(i, j)];
                        k += 1;
                    }
                }
            }
            VarKind::Full => {
                for j in 0..b.cols {
                    for i in 0..b.rows {
                        x[b.offset + j * b.rows + i] = value[(i, j)];
                    }
                }
            }
        }
        let range = b.offset..b.offset + b.len;
        for c in &mut self.constraints {
            let mut constant = c.expr.constant.clone();
            for (i, m) in &c.expr.terms {
                if range.contains(i) {
                    constant += m * x[*i];
                }
            }
            c.expr.constant = constant;
            c.expr.terms.retain(|(i, _)| !range.contains(i));
        }
        Ok(())
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.vars.iter().find(|b| b.name == name)
    }

    /// Value of a named variable block at `x`.
    pub fn value(&self, name: &str, x: &[f64]) -> Option<Matrix> {
        let b = self.block(name)?;
        let mut m = Matrix::zeros(b.rows, b.cols);
        match b.kind {
            VarKind::Symmetric => {
                let mut k = b.offset;
                for j in 0..b.cols {
                    for i in j..b.rows {
                        m[(i, j)] = x[k];
                        m[(j, i)] = x[k];
                        k += 1;
                    }
                }
            }
            VarKind::Full => {
                for j in 0..b.cols {
                    for i in 0..b.rows {
                        m[(i, j)] = x[b.offset + j * b.rows + i];
                    }
                }
            }
        }
        Some(m)
    }

    /// Largest eigenvalue over all constraints written as `F(v) < 0`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                max_symmetric_eigenvalue(&symmetrize(&c.as_negative().eval(x)))
                    .unwrap_or(f64::INFINITY)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute entry over all constraint data; sets the strictness
    /// offset of the solver.
    pub fn scale(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.expr.constant.amax())
            .fold(1.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "variables": self.vars,
            "objective": self.objective,
            "constraints": self.constraints.iter().map(|c| serde_json::json!({
                "name": c.name,
                "sense": c.sense,
                "size": c.expr.nrows(),
                "constant": to_rows(&c.expr.constant),
                "terms": c.expr.terms.iter().map(|(i, m)| serde_json::json!({
                    "var": i,
                    "coefficient": to_rows(m),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    /// Iteration budget exhausted before either certificate was reached.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub phase: u8,
    pub barrier_weight: f64,
    pub value: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<f64>,
    /// Named variable values (row-major).
    pub variables: BTreeMap<String, Vec<Vec<f64>>>,
    /// Largest constraint eigenvalue in `F(v) < 0` form (negative when feasible).
    pub margin: f64,
    pub objective: Option<f64>,
    pub log: Vec<IterationRecord>,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == SdpStatus::Feasible
    }

    pub fn variable(&self, name: &str) -> Option<Matrix> {
        let rows = self.variables.get(name)?;
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        Some(crate::matrix::from_rows(&refs))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Strictness offset relative to the problem scale.
    pub epsilon: f64,
    /// Radius of the ball bounding the decision vector.
    pub radius: f64,
    /// Relative duality-gap target for objective problems.
    pub gap_tol: f64,
    /// For pure feasibility problems: stop at the first strictly feasible point
    /// (`true`) or keep maximizing the margin (`false`).
    pub stop_at_feasible: bool,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-7,
            radius: 1e6,
            gap_tol: 1e-8,
            stop_at_feasible: true,
            max_outer: 60,
            max_newton: 80,
        }
    }
}

/// `G_k(y) = G0_k + sum_i y_i G_ki` required positive definite.
struct Barrier {
    cons: Vec<(Matrix, Vec<(usize, Matrix)>)>,
    ny: usize,
    /// Coordinates `0..nball` are confined to the ball.
    nball: usize,
    radius2: f64,
    c: Vec<f64>,
}

impl Barrier {
    fn dims(&self) -> f64 {
        self.cons.iter().map(|(g, _)| g.nrows() as f64).sum::<f64>() + 1.0
    }

    fn eval_g(&self, k: usize, y: &[f64]) -> Matrix {
        let (g0, terms) = &self.cons[k];
        let mut g = g0.clone();
        for (i, m) in terms {
            g += m * y[*i];
        }
        g
    }

    fn ball_slack(&self, y: &[f64]) -> f64 {
        self.radius2 - y[..self.nball].iter().map(|v| v * v).sum::<f64>()
    }

    /// Barrier value, or `None` outside the domain.
    fn phi(&self, y: &[f64]) -> Option<f64> {
        let b = self.ball_slack(y);
        if !(b > 0.0) {
            return None;
        }
        let mut val = -b.ln();
        for k in 0..self.cons.len() {
            let chol = Cholesky::new(symmetrize(&self.eval_g(k, y)))?;
            let ld: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
            if !ld.is_finite() {
                return None;
            }
            val -= ld;
        }
        Some(val)
    }

    fn objective(&self, y: &[f64]) -> f64 {
        self.c.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// Gradient and Hessian of the barrier alone.
    fn derivatives(&self, y: &[f64]) -> Option<(Vec<f64>, Matrix)> {
        let ny = self.ny;
        let mut g = vec![0.0; ny];
        let mut h = Matrix::zeros(ny, ny);
        for k in 0..self.cons.len() {
            let gk = symmetrize(&self.eval_g(k, y));
            let chol = Cholesky::new(gk)?;
            let l = chol.l();
            let terms = &self.cons[k].1;
            let w: Vec<(usize, Matrix)> = terms
                .iter()
                .map(|(i, m)| {
                    // L^-1 M L^-T
                    let a = l.solve_lower_triangular(m).expect("cholesky factor is nonsingular");
                    let b = l
                        .solve_lower_triangular(&a.transpose())
                        .expect("cholesky factor is nonsingular");
                    (*i, b)
                })
                .collect();
            for (a, (i, wi)) in w.iter().enumerate() {
                g[*i] -= wi.trace();
                for (j, wj) in w.iter().skip(a) {
                    let v = wi.dot(wj);
                    h[(*i, *j)] += v;
                    if i != j {
                        h[(*j, *i)] += v;
                    }
                }
            }
        }
        let b = self.ball_slack(y);
        if !(b > 0.0) {
            return None;
        }
        for i in 0..self.nball {
            g[i] += 2.0 * y[i] / b;
            h[(i, i)] += 2.0 / b;
            for j in 0..self.nball {
                h[(i, j)] += 4.0 * y[i] * y[j] / (b * b);
            }
        }
        Some((g, h))
    }

    /// Damped Newton centering of `t c'y + phi(y)`. Returns the number of steps;
    /// `early` stops as soon as it returns true for the current point.
    fn center(
        &self,
        y: &mut Vec<f64>,
        t: f64,
        max_newton: usize,
        early: &dyn Fn(&[f64]) -> bool,
    ) -> usize {
        let ny = self.ny;
        let f = |p: &[f64]| self.phi(p).map(|v| v + t * self.objective(p));
        let mut steps = 0;
        for _ in 0..max_newton {
            if early(y) {
                break;
            }
            let (g, h) = match self.derivatives(y) {
                Some(d) => d,
                None => break,
            };
            let grad: Vec<f64> = g.iter().zip(&self.c).map(|(a, c)| a + t * c).collect();
            let gvec = Matrix::from_column_slice(ny, 1, &grad);
            let dir = match Cholesky::new(h.clone()) {
                Some(ch) => -ch.solve(&gvec),
                None => {
                    let reg = h.clone() + Matrix::identity(ny, ny) * (1e-12 * h.amax().max(1.0));
                    match reg.lu().solve(&gvec) {
                        Some(s) => -s,
                        None => break,
                    }
                }
            };
            let decrement2 = -(gvec.transpose() * &dir)[(0, 0)];
            steps += 1;
            if !(decrement2 > 1e-10) {
                break;
            }
            let f0 = match f(y) {
                Some(v) => v,
                None => break,
            };
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
                if let Some(fc) = f(&cand) {
                    if fc <= f0 - 0.25 * alpha * decrement2 {
                        *y = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        steps
    }
}

/// Solves the strict LMI problem with a two-phase barrier method.
///
/// Phase I minimizes `s` subject to `F_k(v) + eps I - s I < 0` inside the
/// ball `|v| <= R`, starting from `v = 0`. Reaching `s < 0` certifies
/// feasibility; a central point with `s - m/t > 0` certifies infeasibility
/// (within the ball). Phase II, if an objective is set, follows the central
/// path of the objective over the strictly feasible set.
pub fn solve_sdp(p: &LmiProblem, opts: &SdpOptions) -> SdpSolution {
    let n = p.nvars();
    let eps = opts.epsilon * p.scale();
    let negs: Vec<AffineMatrix> = p.constraints.iter().map(|c| c.as_negative()).collect();
    let mut log = Vec::new();
    // G(v, s) = -(F(v) + eps I) + s I
    let start_s = negs
        .iter()
        .map(|f| {
            max_symmetric_eigenvalue(&symmetrize(&f.constant)).unwrap_or(0.0) + eps
        })
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
        + 1.0;
    let phase1 = Barrier {
        cons: negs
            .iter()
            .map(|f| {
                let d = f.nrows();
                let g0 = -(&f.constant + Matrix::identity(d, d) * eps);
                let mut terms: Vec<(usize, Matrix)> =
                    f.terms.iter().map(|(i, m)| (*i, -m)).collect();
                terms.push((n, Matrix::identity(d, d)));
                (g0, terms)
            })
            .collect(),
        ny: n + 1,
        nball: n,
        radius2: opts.radius * opts.radius,
        c: {
            let mut c = vec![0.0; n + 1];
            c[n] = 1.0;
            c
        },
    };
    let mut y = vec![0.0; n + 1];
    y[n] = start_s;
    let m1 = phase1.dims();
    let mut t = 1.0 / start_s.max(1.0);
    let mut status = SdpStatus::Unknown;
    let want_max_margin = p.objective.is_empty() && !opts.stop_at_feasible;
    for _ in 0..opts.max_outer {
        let stop_early = |q: &[f64]| !want_max_margin && q[n] < 0.0;
        let steps = phase1.center(&mut y, t, opts.max_newton, &stop_early);
        log.push(IterationRecord {
            phase: 1,
            barrier_weight: t,
            value: y[n],
            newton_steps: steps,
        });
        if y[n] < 0.0 && !want_max_margin {
            status = SdpStatus::Feasible;
            break;
        }
        if y[n] - m1 / t > 0.0 {
            status = SdpStatus::Infeasible;
            break;
        }
        if m1 / t < opts.gap_tol * y[n].abs().max(1.0) {
            status = if y[n] < 0.0 {
                SdpStatus::Feasible
            } else {
                SdpStatus::Infeasible
            };
            break;
        }
        t *= 10.0;
    }
    let mut x: Vec<f64> = y[..n].to_vec();
    if status == SdpStatus::Feasible && !p.objective.is_empty() {
        let phase2 = Barrier {
            cons: negs
                .iter()
                .map(|f| {
                    let d = f.nrows();
                    let g0 = -(&f.constant + Matrix::identity(d, d) * eps);
                    (g0, f.terms.iter().map(|(i, m)| (*i, -m)).collect())
                })
                .collect(),
            ny: n,
            nball: n,
            radius2: opts.radius * opts.radius,
            c: p.objective.clone(),
        };
        let m2 = phase2.dims();
        let mut t2 = 1.0;
        for _ in 0..opts.max_outer {
            let steps = phase2.center(&mut x, t2, opts.max_newton, &|_| false);
            let obj = phase2.objective(&x);
            log.push(IterationRecord {
                phase: 2,
                barrier_weight: t2,
                value: obj,
                newton_steps: steps,
            });
            if m2 / t2 < opts.gap_tol * obj.abs().max(1.0) {
                break;
            }
            t2 *= 10.0;
        }
    }
    let margin = p.margin(&x);
    if status == SdpStatus::Feasible && !(margin < 0.0) {
        status = SdpStatus::Unknown;
    }
    let objective = if p.objective.is_empty() {
        None
    } else {
        Some(p.objective.iter().zip(&x).map(|(a, b)| a * b).sum())
    };
    let variables = p
        .vars
        .iter()
        .filter_map(|b| p.value(&b.name, &x).map(|m| (b.name.clone(), to_rows(&m))))
        .collect();
    SdpSolution {
        status,
        x,
        variables,
        margin,
        objective,
        log,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lmi_with_objective() {
        let mut p = LmiProblem::new();
        let x = p.scalar("x");
        p.less_than_zero("upper", &x - &AffineMatrix::identity(1)).unwrap();
        p.less_than_zero("lower", &(-&x) - &AffineMatrix::identity(1).scale(10.0))
            .unwrap();
        p.minimize(&x).unwrap();
        let s = solve_sdp(&p, &SdpOptions::default());
        assert!(s.is_feasible());
        let v = s.x[0];
        assert!(v < 1.0 && s.margin < 0.0);
        assert!((s.objective.unwrap() + 10.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn contradictory_scalar_constraints_are_infeasible() {
        let mut p = LmiProblem::new();
        let x = p.scalar("x");
        p.less_than_zero("x<-1", &x + &AffineMatrix::identity(1)).unwrap();
        p.greater_than_zero("x>1", &x - &AffineMatrix::identity(1)).unwrap();
        let s = solve_sdp(&p, &SdpOptions::default());
        assert_eq!(s.status, SdpStatus::Infeasible);
    }

    #[test]
    fn asymmetric_constraint_rejected() {
        let mut p = LmiProblem::new();
        let y = p.full("Y", 2, 2);
        assert!(matches!(
            p.less_than_zero("bad", y),
            Err(LmiError::NotSymmetric(_))
        ));
    }

    #[test]
    fn variable_values_round_trip() {
        let mut p = LmiProblem::new();
        let q = p.symmetric("Q", 2);
        let y = p.full("Y", 1, 2);
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(p.value("Q", &x).unwrap(), q.eval(&x));
        assert_eq!(p.value("Y", &x).unwrap(), y.eval(&x));
    }
}
