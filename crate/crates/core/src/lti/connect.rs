//! Block-diagram interconnection on state-space data.
//!
//! All parts are stacked block-diagonally, then the wiring `u = F y + G r`
//! is substituted and the static loop through the feedthrough terms is
//! eliminated with `(I - F D)^-1`.

use super::{LtiError, StateSpaceModel};
use crate::matrix::{solve, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartId(pub usize);

/// Signal feeding an external output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// Output channel of a part.
    Part(PartId, usize),
    /// External input channel.
    External(usize),
}

#[derive(Debug, Clone, Default)]
pub struct Network {
    parts: Vec<(String, StateSpaceModel)>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    // (from part, output idx, to part, input idx, gain)
    links: Vec<(usize, usize, usize, usize, f64)>,
    // (external input, to part, input idx, gain)
    feeds: Vec<(usize, usize, usize, f64)>,
    // (external output, source, gain)
    taps: Vec<(usize, Source, f64)>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, model: &StateSpaceModel) -> PartId {
        self.parts.push((name.to_string(), model.clone()));
        PartId(self.parts.len() - 1)
    }

    pub fn part(&self, id: PartId) -> &StateSpaceModel {
        &self.parts[id.0].1
    }

    /// Declares an external input and returns its index.
    pub fn input(&mut self, label: &str) -> usize {
        self.inputs.push(label.to_string());
        self.inputs.len() - 1
    }

    /// Declares `n` external inputs labelled `label0..`; returns the indices.
    pub fn inputs(&mut self, label: &str, n: usize) -> Vec<usize> {
        (0..n).map(|i| self.input(&format!("{label}{i}"))).collect()
    }

    /// Declares an external output and returns its index.
    pub fn output(&mut self, label: &str) -> usize {
        self.outputs.push(label.to_string());
        self.outputs.len() - 1
    }

    pub fn outputs(&mut self, label: &str, n: usize) -> Vec<usize> {
        (0..n).map(|i| self.output(&format!("{label}{i}"))).collect()
    }

    /// Adds `gain * (output `out` of `from`)` to input `inp` of `to`.
    pub fn link(&mut self, from: PartId, out: usize, to: PartId, inp: usize, gain: f64) {
        self.links.push((from.0, out, to.0, inp, gain));
    }

    /// Adds `gain * y_from` to `u_to` for every nonzero entry of `gain`
    /// (rows index `to` inputs starting at `to_off`, columns index `from`
    /// outputs starting at `from_off`).
    pub fn link_block(
        &mut self,
        from: PartId,
        from_off: usize,
        to: PartId,
        to_off: usize,
        gain: &Matrix,
    ) {
        for i in 0..gain.nrows() {
            for j in 0..gain.ncols() {
                if gain[(i, j)] != 0.0 {
                    self.link(from, from_off + j, to, to_off + i, gain[(i, j)]);
                }
            }
        }
    }

    /// Adds `gain * r_ext` to input `inp` of `to`.
    pub fn feed(&mut self, ext: usize, to: PartId, inp: usize, gain: f64) {
        self.feeds.push((ext, to.0, inp, gain));
    }

    /// Adds `gain * source` to external output `ext`.
    pub fn tap(&mut self, ext: usize, source: Source, gain: f64) {
        self.taps.push((ext, source, gain));
    }

    fn offsets(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let mut xs = vec![0];
        let mut us = vec![0];
        let mut ys = vec![0];
        for (_, p) in &self.parts {
            xs.push(xs.last().unwrap() + p.nstates());
            us.push(us.last().unwrap() + p.ninputs());
            ys.push(ys.last().unwrap() + p.noutputs());
        }
        (xs, us, ys)
    }

    fn check_refs(&self) -> Result<(), LtiError> {
        let bad = |msg: String| Err(LtiError::UnknownChannel(msg));
        for &(f, o, t, i, _) in &self.links {
            if f >= self.parts.len() || t >= self.parts.len() {
                return bad("link references a missing part".into());
            }
            if o >= self.parts[f].1.noutputs() {
                return bad(format!("{} has no output {o}", self.parts[f].0));
            }
            if i >= self.parts[t].1.ninputs() {
                return bad(format!("{} has no input {i}", self.parts[t].0));
            }
        }
        for &(e, t, i, _) in &self.feeds {
            if e >= self.inputs.len() {
                return bad(format!("external input {e} not declared"));
            }
            if t >= self.parts.len() || i >= self.parts[t].1.ninputs() {
                return bad("feed targets a missing input".into());
            }
        }
        for &(e, src, _) in &self.taps {
            if e >= self.outputs.len() {
                return bad(format!("external output {e} not declared"));
            }
            match src {
                Source::Part(p, o) => {
                    if p.0 >= self.parts.len() || o >= self.parts[p.0].1.noutputs() {
                        return bad("tap reads a missing output".into());
                    }
                }
                Source::External(x) => {
                    if x >= self.inputs.len() {
                        return bad("tap reads a missing external input".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Parts lying on a cycle of direct-feedthrough links.
    fn algebraic_cycle_parts(&self) -> Vec<String> {
        let np = self.parts.len();
        let mut edge = vec![vec![false; np]; np];
        for &(f, o, t, _, g) in &self.links {
            let d = &self.parts[f].1.d;
            let feeds_through = g != 0.0 && (0..d.ncols()).any(|j| d[(o, j)] != 0.0);
            if feeds_through {
                edge[f][t] = true;
            }
        }
        // transitive closure
        let mut reach = edge.clone();
        for k in 0..np {
            for i in 0..np {
                if reach[i][k] {
                    for j in 0..np {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        (0..np)
            .filter(|&i| reach[i][i])
            .map(|i| self.parts[i].0.clone())
            .collect()
    }

    pub fn build(&self) -> Result<StateSpaceModel, LtiError> {
        self.check_refs()?;
        let refs: Vec<&StateSpaceModel> = self.parts.iter().map(|(_, p)| p).collect();
        let stacked = StateSpaceModel::append(&refs);
        let (_, us, ys) = self.offsets();
        let (nu, ny) = (stacked.ninputs(), stacked.noutputs());
        let (nr, nz) = (self.inputs.len(), self.outputs.len());
        let mut f = Matrix::zeros(nu, ny);
        let mut g = Matrix::zeros(nu, nr);
        let mut h = Matrix::zeros(nz, ny);
        let mut j = Matrix::zeros(nz, nr);
        for &(from, o, to, i, gain) in &self.links {
            f[(us[to] + i, ys[from] + o)] += gain;
        }
        for &(e, to, i, gain) in &self.feeds {
            g[(us[to] + i, e)] += gain;
        }
        for &(e, src, gain) in &self.taps {
            match src {
                Source::Part(p, o) => h[(e, ys[p.0] + o)] += gain,
                Source::External(x) => j[(e, x)] += gain,
            }
        }
        let loop_matrix = Matrix::identity(nu, nu) - &f * &stacked.d;
        let ill_posed = || LtiError::IllPosed {
            parts: {
                let p = self.algebraic_cycle_parts();
                if p.is_empty() {
                    self.parts.iter().map(|(n, _)| n.clone()).collect()
                } else {
                    p
                }
            },
        };
        // u = E (F C x + G r) with E = (I - F D)^-1
        let rhs = {
            let fc = &f * &stacked.c;
            let mut r = Matrix::zeros(nu, fc.ncols() + nr);
            r.view_mut((0, 0), fc.shape()).copy_from(&fc);
            r.view_mut((0, fc.ncols()), g.shape()).copy_from(&g);
            r
        };
        let sol = if nu == 0 {
            rhs.clone()
        } else {
            solve(&loop_matrix, &rhs).map_err(|_| ill_posed())?
        };
        let n = stacked.nstates();
        let efc = sol.columns(0, n).into_owned();
        let eg = sol.columns(n, nr).into_owned();
        let a = &stacked.a + &stacked.b * &efc;
        let b = &stacked.b * &eg;
        let c = &h * (&stacked.c + &stacked.d * &efc);
        let d = &h * &stacked.d * &eg + &j;
        StateSpaceModel::with_labels(a, b, c, d, self.inputs.clone(), self.outputs.clone())
    }
}

/// `G2 * G1`: output of `g1` drives `g2`.
pub fn series(g1: &StateSpaceModel, g2: &StateSpaceModel) -> Result<StateSpaceModel, LtiError> {
    if g1.noutputs() != g2.ninputs() {
        return Err(LtiError::Dimension(format!(
            "series: {} outputs into {} inputs",
            g1.noutputs(),
            g2.ninputs()
        )));
    }
    let mut net = Network::new();
    let a = net.add("first", g1);
    let b = net.add("second", g2);
    for i in 0..g1.ninputs() {
        let e = net.input(&g1.input_labels[i]);
        net.feed(e, a, i, 1.0);
    }
    for k in 0..g1.noutputs() {
        net.link(a, k, b, k, 1.0);
    }
    for o in 0..g2.noutputs() {
        let e = net.output(&g2.output_labels[o]);
        net.tap(e, Source::Part(b, o), 1.0);
    }
    net.build()
}

/// `G1 + G2` with shared inputs.
pub fn parallel(g1: &StateSpaceModel, g2: &StateSpaceModel) -> Result<StateSpaceModel, LtiError> {
    if g1.ninputs() != g2.ninputs() || g1.noutputs() != g2.noutputs() {
        return Err(LtiError::Dimension("parallel: shapes differ".into()));
    }
    let mut net = Network::new();
    let a = net.add("first", g1);
    let b = net.add("second", g2);
    for i in 0..g1.ninputs() {
        let e = net.input(&g1.input_labels[i]);
        net.feed(e, a, i, 1.0);
        net.feed(e, b, i, 1.0);
    }
    for o in 0..g1.noutputs() {
        let e = net.output(&g1.output_labels[o]);
        net.tap(e, Source::Part(a, o), 1.0);
        net.tap(e, Source::Part(b, o), 1.0);
    }
    net.build()
}

/// Negative feedback `y = G (r - K y)`, mapping `r` to `y`.
pub fn feedback(g: &StateSpaceModel, k: &StateSpaceModel) -> Result<StateSpaceModel, LtiError> {
    if k.ninputs() != g.noutputs() || k.noutputs() != g.ninputs() {
        return Err(LtiError::Dimension("feedback: K must map y back to u".into()));
    }
    let mut net = Network::new();
    let gp = net.add("G", g);
    let kp = net.add("K", k);
    for i in 0..g.ninputs() {
        let e = net.input(&g.input_labels[i]);
        net.feed(e, gp, i, 1.0);
    }
    net.link_block(gp, 0, kp, 0, &Matrix::identity(g.noutputs(), g.noutputs()));
    net.link_block(kp, 0, gp, 0, &(-Matrix::identity(g.ninputs(), g.ninputs())));
    for o in 0..g.noutputs() {
        let e = net.output(&g.output_labels[o]);
        net.tap(e, Source::Part(gp, o), 1.0);
    }
    net.build()
}

/// Lower LFT `F_l(P, K)`: the last `K.ninputs()` outputs of `P` drive `K`,
/// whose outputs close the last `K.noutputs()` inputs of `P`.
pub fn lft_lower(p: &StateSpaceModel, k: &StateSpaceModel) -> Result<StateSpaceModel, LtiError> {
    let (ny, nu) = (k.ninputs(), k.noutputs());
    if ny > p.noutputs() || nu > p.ninputs() {
        return Err(LtiError::Dimension("lft: compensator larger than plant".into()));
    }
    let nw = p.ninputs() - nu;
    let nz = p.noutputs() - ny;
    let mut net = Network::new();
    let pp = net.add("P", p);
    let kp = net.add("K", k);
    for i in 0..nw {
        let e = net.input(&p.input_labels[i]);
        net.feed(e, pp, i, 1.0);
    }
    for i in 0..ny {
        net.link(pp, nz + i, kp, i, 1.0);
    }
    for i in 0..nu {
        net.link(kp, i, pp, nw + i, 1.0);
    }
    for o in 0..nz {
        let e = net.output(&p.output_labels[o]);
        net.tap(e, Source::Part(pp, o), 1.0);
    }
    net.build()
}

/// `S = (I + G G_my)^-1`, realized as the loop from `y_hat` to the
/// saturation error `y_hat - y` with `y = G G_my (y_hat - y)`.
pub fn anti_windup_sensitivity(
    g: &StateSpaceModel,
    gmy: &StateSpaceModel,
) -> Result<StateSpaceModel, LtiError> {
    let p = g.noutputs();
    if gmy.ninputs() != p || gmy.noutputs() != g.ninputs() {
        return Err(LtiError::Dimension(
            "sensitivity: G_my must map the G outputs back to its inputs".into(),
        ));
    }
    let mut net = Network::new();
    let gp = net.add("G", g);
    let mp = net.add("G_my", gmy);
    let yhat = net.inputs("yhat", p);
    let err = net.outputs("sat_err", p);
    for i in 0..p {
        net.feed(yhat[i], mp, i, 1.0);
        net.link(gp, i, mp, i, -1.0);
        net.tap(err[i], Source::External(yhat[i]), 1.0);
        net.tap(err[i], Source::Part(gp, i), -1.0);
    }
    net.link_block(mp, 0, gp, 0, &Matrix::identity(g.ninputs(), g.ninputs()));
    net.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{frequency_response, RationalTransfer};
    use crate::matrix::{from_rows, C64};

    fn plant() -> StateSpaceModel {
        RationalTransfer::siso(&[1.0], &[1.0, 1.0, 1.0])
            .unwrap()
            .to_state_space()
            .unwrap()
    }

    fn resp_close(a: &StateSpaceModel, b: &StateSpaceModel, tol: f64) {
        for k in 0..12 {
            let w = 10f64.powf(-2.0 + 0.35 * k as f64);
            let ga = frequency_response(a, w).unwrap();
            let gb = frequency_response(b, w).unwrap();
            assert!((&ga - &gb).norm() <= tol * gb.norm().max(1e-12), "at {w}");
        }
    }

    #[test]
    fn feedback_with_zero_gain_is_identity_map() {
        let g = plant();
        let cl = feedback(&g, &StateSpaceModel::zero(1, 1)).unwrap();
        resp_close(&cl, &g, 1e-12);
        assert_eq!(cl.a, g.a);
    }

    #[test]
    fn series_with_identity() {
        let g = plant();
        let s = series(&g, &StateSpaceModel::identity(1)).unwrap();
        assert_eq!((s.a.clone(), s.b.clone(), s.c.clone(), s.d.clone()), (g.a.clone(), g.b.clone(), g.c.clone(), g.d.clone()));
    }

    #[test]
    fn sensitivity_with_static_gain_matches_scalar_algebra() {
        let g = plant();
        let k = 2.5;
        let s = anti_windup_sensitivity(&g, &StateSpaceModel::static_gain(from_rows(&[&[k]])))
            .unwrap();
        for i in 0..10 {
            let w = 10f64.powf(-2.0 + 0.5 * i as f64);
            let gj = C64::new(1.0, 0.0) / C64::new(1.0 - w * w, w);
            let expected = C64::new(1.0, 0.0) / (C64::new(1.0, 0.0) + gj * k);
            let got = frequency_response(&s, w).unwrap()[(0, 0)];
            assert!((got - expected).norm() <= 1e-12);
        }
    }

    #[test]
    fn sensitivity_examples() {
        let g = plant();
        let s0 = anti_windup_sensitivity(&g, &StateSpaceModel::zero(1, 1)).unwrap();
        assert!((frequency_response(&s0, 3.0).unwrap()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        let one = StateSpaceModel::identity(1);
        let half = anti_windup_sensitivity(&one, &one).unwrap();
        assert!((half.d[(0, 0)] - 0.5).abs() < 1e-15);
        let s10 = anti_windup_sensitivity(&g, &StateSpaceModel::static_gain(from_rows(&[&[10.0]])))
            .unwrap();
        let dc = frequency_response(&s10, 0.0).unwrap()[(0, 0)].norm();
        assert!((dc - 1.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn ill_posed_loop_names_parts() {
        let one = StateSpaceModel::identity(1);
        let mut net = Network::new();
        let a = net.add("alpha", &one);
        let b = net.add("beta", &one);
        let c = net.add("gamma", &plant());
        net.link(a, 0, b, 0, 1.0);
        net.link(b, 0, a, 0, 1.0);
        net.link(b, 0, c, 0, 1.0);
        match net.build() {
            Err(LtiError::IllPosed { parts }) => assert_eq!(parts, vec!["alpha", "beta"]),
            other => panic!("expected ill-posed loop, got {other:?}"),
        }
    }

    #[test]
    fn lft_with_zero_compensator_is_open_loop_block() {
        let g = plant();
        let mut net = Network::new();
        let gp = net.add("G", &g);
        let w = net.input("w");
        let u = net.input("u");
        net.feed(w, gp, 0, 1.0);
        net.feed(u, gp, 0, 2.0);
        let z = net.output("z");
        let y = net.output("y");
        net.tap(z, Source::Part(gp, 0), 3.0);
        net.tap(y, Source::Part(gp, 0), 1.0);
        net.tap(y, Source::External(w), 1.0);
        let p = net.build().unwrap();
        let cl = lft_lower(&p, &StateSpaceModel::zero(1, 1)).unwrap();
        resp_close(&cl, &p.select(&[0], &[0]).unwrap(), 1e-12);
    }

    #[test]
    fn lft_affine_case() {
        let p = StateSpaceModel::static_gain(from_rows(&[&[2.0, 3.0], &[5.0, 0.0]]));
        let cl = lft_lower(&p, &StateSpaceModel::static_gain(from_rows(&[&[0.7]]))).unwrap();
        assert!((cl.d[(0, 0)] - (2.0 + 3.0 * 0.7 * 5.0)).abs() < 1e-14);
    }
}
