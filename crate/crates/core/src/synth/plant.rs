//! Generalized plants for the state and joint input-state anti-windup problems.

use crate::lti::{
    anti_windup_sensitivity, lft_lower, series, LtiError, Network, Source, StateSpaceModel,
};
use crate::matrix::Matrix;

/// Plant with inputs `[w; u]` and outputs `[z; y]`; the compensator maps
/// `y` (last `n_meas` outputs) to `u` (last `n_ctrl` inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPlant {
    pub model: StateSpaceModel,
    pub n_exo: usize,
    pub n_ctrl: usize,
    pub n_perf: usize,
    pub n_meas: usize,
}

impl GeneralizedPlant {
    pub fn new(
        model: StateSpaceModel,
        n_exo: usize,
        n_ctrl: usize,
        n_perf: usize,
        n_meas: usize,
    ) -> Result<Self, LtiError> {
        if n_exo + n_ctrl != model.ninputs() || n_perf + n_meas != model.noutputs() {
            return Err(LtiError::Dimension(format!(
                "partition ({n_exo}+{n_ctrl}, {n_perf}+{n_meas}) does not match {}x{}",
                model.noutputs(),
                model.ninputs()
            )));
        }
        Ok(Self {
            model,
            n_exo,
            n_ctrl,
            n_perf,
            n_meas,
        })
    }

    /// Open-loop exogenous-to-performance block.
    pub fn p11(&self) -> StateSpaceModel {
        let z: Vec<usize> = (0..self.n_perf).collect();
        let w: Vec<usize> = (0..self.n_exo).collect();
        self.model.select(&z, &w).expect("partition indices are in range")
    }
}

fn check_weight(w: &StateSpaceModel, n: usize, name: &str) -> Result<(), LtiError> {
    if w.ninputs() != n || w.noutputs() != n {
        return Err(LtiError::Dimension(format!("{name} must be {n}x{n}")));
    }
    Ok(())
}

fn identity_links(net: &mut Network, from: crate::lti::PartId, to: crate::lti::PartId, n: usize, gain: f64) {
    net.link_block(from, 0, to, 0, &(Matrix::identity(n, n) * gain));
}

/// State (output) anti-windup plant with inputs `(yhat, u_c, u_my)` and
/// outputs `(z1, z2, yhat - y)`:
/// `z1 = W1 (yhat - G u_c - G u_my)`, `z2 = W2 u_my`.
pub fn build_oantw_plant(
    g: &StateSpaceModel,
    w1: &StateSpaceModel,
    w2: &StateSpaceModel,
) -> Result<GeneralizedPlant, LtiError> {
    let (p, m) = (g.noutputs(), g.ninputs());
    check_weight(w1, p, "W1")?;
    check_weight(w2, m, "W2")?;
    let mut net = Network::new();
    let gp = net.add("G", g);
    let w1p = net.add("W1", w1);
    let w2p = net.add("W2", w2);
    let yhat = net.inputs("yhat", p);
    let uc = net.inputs("u_c", m);
    let umy = net.inputs("u_my", m);
    let z1 = net.outputs("z1_", p);
    let z2 = net.outputs("z2_", m);
    let err = net.outputs("sat_err", p);
    for i in 0..m {
        net.feed(uc[i], gp, i, 1.0);
        net.feed(umy[i], gp, i, 1.0);
        net.feed(umy[i], w2p, i, 1.0);
        net.tap(z2[i], Source::Part(w2p, i), 1.0);
    }
    for i in 0..p {
        net.feed(yhat[i], w1p, i, 1.0);
        net.tap(z1[i], Source::Part(w1p, i), 1.0);
        net.tap(err[i], Source::External(yhat[i]), 1.0);
        net.tap(err[i], Source::Part(gp, i), -1.0);
    }
    identity_links(&mut net, gp, w1p, p, -1.0);
    GeneralizedPlant::new(net.build()?, p + m, m, p + m, p)
}

/// Joint input-state plant. Inputs `(yhat, d, e, uhat, u_my, u_mu)`, outputs
/// `(Wy (yhat - y), Wu (uhat - u), yhat - y, uhat - u)` with
/// `u = K (e + u_mu) + u_my` and `y = G u + d`.
pub fn build_isantw_plant(
    g: &StateSpaceModel,
    k: &StateSpaceModel,
    wu: &StateSpaceModel,
    wy: &StateSpaceModel,
) -> Result<GeneralizedPlant, LtiError> {
    let (p, m) = (g.noutputs(), g.ninputs());
    let nk = k.ninputs();
    if k.noutputs() != m {
        return Err(LtiError::Dimension("K must drive the plant inputs".into()));
    }
    check_weight(wy, p, "Wy")?;
    check_weight(wu, m, "Wu")?;
    let mut net = Network::new();
    let gp = net.add("G", g);
    let kp = net.add("K", k);
    let wyp = net.add("Wy", wy);
    let wup = net.add("Wu", wu);
    let yhat = net.inputs("yhat", p);
    let d = net.inputs("d", p);
    let e = net.inputs("e", nk);
    let uhat = net.inputs("uhat", m);
    let umy = net.inputs("u_my", m);
    let umu = net.inputs("u_mu", nk);
    let zy = net.outputs("zy", p);
    let zu = net.outputs("zu", m);
    let ey = net.outputs("sat_err_y", p);
    let eu = net.outputs("sat_err_u", m);
    for i in 0..nk {
        net.feed(e[i], kp, i, 1.0);
        net.feed(umu[i], kp, i, 1.0);
    }
    identity_links(&mut net, kp, gp, m, 1.0);
    for i in 0..m {
        net.feed(umy[i], gp, i, 1.0);
        // uhat - u = uhat - K(..) - u_my
        net.feed(uhat[i], wup, i, 1.0);
        net.feed(umy[i], wup, i, -1.0);
        net.tap(zu[i], Source::Part(wup, i), 1.0);
        net.tap(eu[i], Source::External(uhat[i]), 1.0);
        net.tap(eu[i], Source::External(umy[i]), -1.0);
        net.tap(eu[i], Source::Part(kp, i), -1.0);
    }
    identity_links(&mut net, kp, wup, m, -1.0);
    for i in 0..p {
        net.feed(yhat[i], wyp, i, 1.0);
        net.feed(d[i], wyp, i, -1.0);
        net.tap(zy[i], Source::Part(wyp, i), 1.0);
        net.tap(ey[i], Source::External(yhat[i]), 1.0);
        net.tap(ey[i], Source::External(d[i]), -1.0);
        net.tap(ey[i], Source::Part(gp, i), -1.0);
    }
    identity_links(&mut net, gp, wyp, p, -1.0);
    GeneralizedPlant::new(net.build()?, 2 * p + nk + m, m + nk, p + m, p + m)
}

/// `F_l(P, C)`: exogenous inputs to performance outputs.
pub fn closed_loop(p: &GeneralizedPlant, c: &StateSpaceModel) -> Result<StateSpaceModel, LtiError> {
    if c.ninputs() != p.n_meas || c.noutputs() != p.n_ctrl {
        return Err(LtiError::Dimension(format!(
            "compensator is {}x{}, plant expects {}x{}",
            c.noutputs(),
            c.ninputs(),
            p.n_ctrl,
            p.n_meas
        )));
    }
    lft_lower(&p.model, c)
}

/// `[[W1 S, -W1 S G], [W2 G_my S, -W2 G_my S G]]` built from the sensitivity
/// directly, independent of the generalized plant.
pub fn mixed_sensitivity(
    g: &StateSpaceModel,
    gmy: &StateSpaceModel,
    w1: &StateSpaceModel,
    w2: &StateSpaceModel,
) -> Result<StateSpaceModel, LtiError> {
    let s = anti_windup_sensitivity(g, gmy)?;
    let sg = series(g, &s)?;
    let w1s = series(&s, w1)?;
    let w1sg = series(&sg, w1)?.scaled(-1.0);
    let w2ks = series(&series(&s, gmy)?, w2)?;
    let w2ksg = series(&series(&sg, gmy)?, w2)?.scaled(-1.0);
    let (p, m) = (g.noutputs(), g.ninputs());
    let mut net = Network::new();
    let parts = [
        net.add("W1S", &w1s),
        net.add("W1SG", &w1sg),
        net.add("W2KS", &w2ks),
        net.add("W2KSG", &w2ksg),
    ];
    let yhat = net.inputs("yhat", p);
    let uc = net.inputs("u_c", m);
    let z1 = net.outputs("z1_", p);
    let z2 = net.outputs("z2_", m);
    for (col, ins) in [(0usize, &yhat), (1, &uc)] {
        for (i, &e) in ins.iter().enumerate() {
            net.feed(e, parts[col], i, 1.0);
            net.feed(e, parts[col + 2], i, 1.0);
        }
    }
    for (row, outs) in [(0usize, &z1), (2, &z2)] {
        for (i, &o) in outs.iter().enumerate() {
            net.tap(o, Source::Part(parts[row], i), 1.0);
            net.tap(o, Source::Part(parts[row + 1], i), 1.0);
        }
    }
    net.build()
}
