//! Fixed-structure compensator parameterization.
//!
//! Each input column carries its own single-input block in modal form:
//! complex pairs `[[s, w], [-w, s]]` driven through `[0; 1]`, plus one real
//! pole for odd orders, with `s = -(softplus(theta) + POLE_MARGIN)`. Output
//! gains and feedthrough are free on the rows the column is allowed to reach.
//! A block-diagonal compensator is therefore a masked full-matrix one with
//! the same per-column orders.

use crate::lti::StateSpaceModel;
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// Smallest decay rate of a compensator pole.
pub const POLE_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleMode {
    /// Poles parameterized in the open left half-plane.
    Stable,
    /// A single integrator per column (order must be 1).
    Integrator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    PoleRate,
    PoleFrequency,
    Gain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatorStructure {
    pub name: String,
    pub n_in: usize,
    pub n_out: usize,
    /// Order of the block driven by each input column.
    pub orders: Vec<usize>,
    /// `mask[o][i]`: input column `i` may reach output `o`.
    pub mask: Vec<Vec<bool>>,
    pub pole_mode: PoleMode,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

impl CompensatorStructure {
    /// Unstructured compensator with the given order per input column.
    pub fn full(n_in: usize, n_out: usize, orders: Vec<usize>) -> Self {
        assert_eq!(orders.len(), n_in, "one order per input column");
        Self {
            name: "full".into(),
            n_in,
            n_out,
            orders,
            mask: vec![vec![true; n_in]; n_out],
            pole_mode: PoleMode::Stable,
        }
    }

    pub fn static_gain(n_in: usize, n_out: usize) -> Self {
        let mut s = Self::full(n_in, n_out, vec![0; n_in]);
        s.name = "static".into();
        s
    }

    /// Block-diagonal compensator: block `b` maps its `blocks[b].0` inputs to
    /// its `blocks[b].1` outputs, each input column with order `orders[b]`.
    pub fn block_diagonal(blocks: &[(usize, usize)], orders: &[usize]) -> Self {
        assert_eq!(blocks.len(), orders.len(), "one order per block");
        let n_in: usize = blocks.iter().map(|b| b.0).sum();
        let n_out: usize = blocks.iter().map(|b| b.1).sum();
        let mut mask = vec![vec![false; n_in]; n_out];
        let mut col_orders = Vec::with_capacity(n_in);
        let (mut i0, mut o0) = (0, 0);
        for (b, &(ni, no)) in blocks.iter().enumerate() {
            for row in mask.iter_mut().skip(o0).take(no) {
                row[i0..i0 + ni].fill(true);
            }
            col_orders.extend(std::iter::repeat(orders[b]).take(ni));
            i0 += ni;
            o0 += no;
        }
        Self {
            name: "diagonal".into(),
            n_in,
            n_out,
            orders: col_orders,
            mask,
            pole_mode: PoleMode::Stable,
        }
    }

    /// Proportional-integral form: one integrator per input column.
    pub fn pi_form(n_in: usize, n_out: usize) -> Self {
        Self {
            name: "pi".into(),
            pole_mode: PoleMode::Integrator,
            ..Self::full(n_in, n_out, vec![1; n_in])
        }
    }

    pub fn order(&self) -> usize {
        self.orders.iter().sum()
    }

    fn outputs_of(&self, col: usize) -> Vec<usize> {
        (0..self.n_out).filter(|&o| self.mask[o][col]).collect()
    }

    fn pole_params(&self, col: usize) -> usize {
        match self.pole_mode {
            PoleMode::Stable => self.orders[col],
            PoleMode::Integrator => 0,
        }
    }

    fn column_len(&self, col: usize) -> usize {
        let q = self.outputs_of(col).len();
        self.pole_params(col) + q * self.orders[col] + q
    }

    pub fn nparams(&self) -> usize {
        (0..self.n_in).map(|c| self.column_len(c)).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.orders.len() != self.n_in {
            return Err("one order per input column".into());
        }
        if self.mask.len() != self.n_out || self.mask.iter().any(|r| r.len() != self.n_in) {
            return Err("mask must be n_out x n_in".into());
        }
        if self.pole_mode == PoleMode::Integrator && self.orders.iter().any(|&o| o != 1) {
            return Err("integrator columns have order 1".into());
        }
        Ok(())
    }

    /// Compensator realization for parameter vector `theta`.
    pub fn realize(&self, theta: &[f64]) -> StateSpaceModel {
        assert_eq!(theta.len(), self.nparams(), "parameter count");
        let n = self.order();
        let mut a = Matrix::zeros(n, n);
        let mut b = Matrix::zeros(n, self.n_in);
        let mut c = Matrix::zeros(self.n_out, n);
        let mut d = Matrix::zeros(self.n_out, self.n_in);
        let (mut k, mut x0) = (0usize, 0usize);
        for col in 0..self.n_in {
            let r = self.orders[col];
            match self.pole_mode {
                PoleMode::Integrator => {
                    b[(x0, col)] = 1.0;
                }
                PoleMode::Stable => {
                    let mut j = 0;
                    while j + 1 < r {
                        let s = -(softplus(theta[k]) + POLE_MARGIN);
                        let w = theta[k + 1];
                        a[(x0 + j, x0 + j)] = s;
                        a[(x0 + j, x0 + j + 1)] = w;
                        a[(x0 + j + 1, x0 + j)] = -w;
                        a[(x0 + j + 1, x0 + j + 1)] = s;
                        b[(x0 + j + 1, col)] = 1.0;
                        k += 2;
                        j += 2;
                    }
                    if j < r {
                        a[(x0 + j, x0 + j)] = -(softplus(theta[k]) + POLE_MARGIN);
                        b[(x0 + j, col)] = 1.0;
                        k += 1;
                    }
                }
            }
            for o in self.outputs_of(col) {
                for j in 0..r {
                    c[(o, x0 + j)] = theta[k];
                    k += 1;
                }
                d[(o, col)] = theta[k];
                k += 1;
            }
            x0 += r;
        }
        StateSpaceModel::new(a, b, c, d).expect("structure dimensions are consistent")
    }

    /// Role of each entry of the parameter vector.
    pub fn param_kinds(&self) -> Vec<ParamKind> {
        let mut kinds = Vec::with_capacity(self.nparams());
        for col in 0..self.n_in {
            let r = self.orders[col];
            if self.pole_mode == PoleMode::Stable {
                let mut j = 0;
                while j < r {
                    kinds.push(ParamKind::PoleRate);
                    if j + 1 < r {
                        kinds.push(ParamKind::PoleFrequency);
                    }
                    j += 2;
                }
            }
            let q = self.outputs_of(col).len();
            kinds.extend(std::iter::repeat(ParamKind::Gain).take(q * (r + 1)));
        }
        kinds
    }

    /// Parameters giving the zero compensator with poles spread over `[0.5, 5]`.
    pub fn neutral_params(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.nparams());
        for col in 0..self.n_in {
            let r = self.orders[col];
            if self.pole_mode == PoleMode::Stable {
                let mut j = 0;
                while j < r {
                    let rate = 0.5 * 10f64.powf(j as f64 / r.max(1) as f64);
                    theta.push(softplus_inv(rate));
                    if j + 1 < r {
                        theta.push(rate);
                    }
                    j += 2;
                }
            }
            let q = self.outputs_of(col).len();
            theta.extend(std::iter::repeat(0.0).take(q * (r + 1)));
        }
        theta
    }

    /// Maps parameters of `other` into this structure without changing the
    /// transfer. Every path of `other` must exist here, each column's order
    /// may only grow, and an odd-order column must stay odd (its real pole
    /// keeps the last slot). Added modes get neutral poles and zero gains.
    pub fn embed(&self, other: &CompensatorStructure, theta: &[f64]) -> Option<Vec<f64>> {
        if self.n_in != other.n_in
            || self.n_out != other.n_out
            || self.pole_mode != other.pole_mode
            || theta.len() != other.nparams()
        {
            return None;
        }
        for col in 0..self.n_in {
            let (r, ro) = (self.orders[col], other.orders[col]);
            if ro > r || (ro % 2 == 1 && r % 2 == 0) {
                return None;
            }
            if self.pole_mode == PoleMode::Integrator && ro != r {
                return None;
            }
        }
        for o in 0..self.n_out {
            for i in 0..self.n_in {
                if other.mask[o][i] && !self.mask[o][i] {
                    return None;
                }
            }
        }
        let neutral = self.neutral_params();
        let mut out = Vec::with_capacity(self.nparams());
        let (mut k, mut kn) = (0, 0);
        for col in 0..self.n_in {
            let (r, ro) = (self.orders[col], other.orders[col]);
            let (np, npo) = (self.pole_params(col), other.pole_params(col));
            if self.pole_mode == PoleMode::Stable {
                let pairs_o = 2 * (ro / 2);
                let mut poles = neutral[kn..kn + np].to_vec();
                poles[..pairs_o].copy_from_slice(&theta[k..k + pairs_o]);
                if ro % 2 == 1 {
                    poles[np - 1] = theta[k + npo - 1];
                }
                out.extend(poles);
            }
            k += npo;
            kn += np + self.outputs_of(col).len() * (r + 1);
            let map = |s: usize| if ro % 2 == 1 && s == ro - 1 { r - 1 } else { s };
            for o in 0..self.n_out {
                if !self.mask[o][col] {
                    continue;
                }
                let mut row = vec![0.0; r + 1];
                if other.mask[o][col] {
                    for s in 0..ro {
                        row[map(s)] = theta[k + s];
                    }
                    row[r] = theta[k + ro];
                    k += ro + 1;
                }
                out.extend(row);
            }
        }
        Some(out)
    }
}
