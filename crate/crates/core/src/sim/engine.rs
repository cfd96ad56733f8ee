//! RK4 integration of the combined plant / controller / compensator state.

use super::{
    saturate_vec, LoopConfig, PlantDynamics, PlantInput, SimError, SimulationTrace, Vector,
};
use crate::lti::{Network, Source, StateSpaceModel};
use crate::matrix::{solve, Matrix};

const LOOP_MAX_ITER: usize = 50;
const LOOP_TOL: f64 = 1e-10;

/// Compensator matrices split by channel.
struct Prepared<'a> {
    cfg: &'a LoopConfig,
    plant: &'a dyn PlantDynamics,
    np: usize,
    nk: usize,
    na: usize,
    aw: Option<AwParts>,
}

struct AwParts {
    a: Matrix,
    b: Matrix,
    c_my: Matrix,
    c_mu: Matrix,
    d_my_y: Matrix,
    d_my_u: Matrix,
    d_mu_y: Matrix,
    d_mu_u: Matrix,
    n_se: usize,
    n_ie: usize,
}

struct Sample {
    y: Vector,
    y_hat: Vector,
    y_meas: Vector,
    r: Vector,
    u_c: Vector,
    u_my: Vector,
    u_mu: Vector,
    u: Vector,
    u_hat: Vector,
}

impl<'a> Prepared<'a> {
    fn new(cfg: &'a LoopConfig) -> Self {
        let plant = cfg.plant.dynamics();
        let aw = cfg.anti_windup.as_ref().map(|aw| {
            let m = &aw.model;
            let (nmy, nmu, nse, nie) = (aw.n_u_my, aw.n_u_mu, aw.n_state_err, aw.n_input_err);
            AwParts {
                a: m.a.clone(),
                b: m.b.clone(),
                c_my: m.c.rows(0, nmy).into_owned(),
                c_mu: m.c.rows(nmy, nmu).into_owned(),
                d_my_y: m.d.view((0, 0), (nmy, nse)).into_owned(),
                d_my_u: m.d.view((0, nse), (nmy, nie)).into_owned(),
                d_mu_y: m.d.view((nmy, 0), (nmu, nse)).into_owned(),
                d_mu_u: m.d.view((nmy, nse), (nmu, nie)).into_owned(),
                n_se: nse,
                n_ie: nie,
            }
        });
        Self {
            cfg,
            plant,
            np: plant.nstates(),
            nk: cfg.nominal_controller.nstates(),
            na: cfg.anti_windup.as_ref().map(|a| a.model.nstates()).unwrap_or(0),
            aw,
        }
    }

    fn dim(&self) -> usize {
        self.np + self.nk + self.na
    }

    fn evaluate(&self, t: f64, z: &Vector) -> Result<(Vector, Sample), SimError> {
        let cfg = self.cfg;
        let k = &cfg.nominal_controller;
        let x = z.rows(0, self.np).into_owned();
        let xk = z.rows(self.np, self.nk).into_owned();
        let xa = z.rows(self.np + self.nk, self.na).into_owned();
        let w = cfg.disturbance.value(t);
        let r = cfg.reference.value(t);
        let y_meas = self.plant.measured(t, &x, &w);
        let y = self.plant.constrained(t, &x, &w);
        let y_hat = saturate_vec(&y, &cfg.state_sat);
        let ey = &y_hat - &y;
        let e = &r - &y_meas;
        let nu = self.plant.ninputs();
        let nm = self.plant.nmeasured();

        let (my0, mu0, m_loop) = match &self.aw {
            Some(p) => {
                let ey_in = if p.n_se > 0 { ey.clone() } else { Vector::zeros(0) };
                let my0 = &p.c_my * &xa + &p.d_my_y * &ey_in;
                let mu0 = &p.c_mu * &xa + &p.d_mu_y * &ey_in;
                let mut m = Matrix::zeros(nu, nu);
                if p.n_ie > 0 {
                    if p.d_my_u.nrows() > 0 {
                        m += &p.d_my_u;
                    }
                    if p.d_mu_u.nrows() > 0 {
                        m += &k.d * &p.d_mu_u;
                    }
                }
                (my0, mu0, m)
            }
            None => (Vector::zeros(0), Vector::zeros(0), Matrix::zeros(nu, nu)),
        };
        let pad = |v: &Vector, n: usize| if v.len() == n { v.clone() } else { Vector::zeros(n) };
        let my0 = pad(&my0, nu);
        let mu0 = pad(&mu0, nm);
        let a_vec = &k.c * &xk + &k.d * (&e + &mu0) + &my0;

        let (u, u_hat) = match &cfg.input_sat {
            Some(spec) => {
                let u = solve_input_loop(&a_vec, &m_loop, spec, t)?;
                let uh = saturate_vec(&u, spec);
                (u, uh)
            }
            None => (a_vec.clone(), a_vec.clone()),
        };
        let eu = &u_hat - &u;
        let (u_my, u_mu) = match &self.aw {
            Some(p) if p.n_ie > 0 => {
                let my = if p.d_my_u.nrows() > 0 { &my0 + &p.d_my_u * &eu } else { my0.clone() };
                let mu = if p.d_mu_u.nrows() > 0 { &mu0 + &p.d_mu_u * &eu } else { mu0.clone() };
                (my, mu)
            }
            _ => (my0, mu0),
        };
        let k_in = &e + &u_mu;
        let u_c = &k.c * &xk + &k.d * &k_in;
        let plant_u = match cfg.plant_input {
            PlantInput::Command => &u,
            PlantInput::Saturated => &u_hat,
        };
        let mut dz = Vector::zeros(self.dim());
        dz.rows_mut(0, self.np)
            .copy_from(&self.plant.derivative(t, &x, plant_u, &w));
        dz.rows_mut(self.np, self.nk)
            .copy_from(&(&k.a * &xk + &k.b * &k_in));
        if let Some(p) = &self.aw {
            let mut inp = Vector::zeros(p.n_se + p.n_ie);
            if p.n_se > 0 {
                inp.rows_mut(0, p.n_se).copy_from(&ey);
            }
            if p.n_ie > 0 {
                inp.rows_mut(p.n_se, p.n_ie).copy_from(&eu);
            }
            dz.rows_mut(self.np + self.nk, self.na)
                .copy_from(&(&p.a * &xa + &p.b * inp));
        }
        Ok((
            dz,
            Sample {
                y,
                y_hat,
                y_meas,
                r,
                u_c,
                u_my,
                u_mu,
                u,
                u_hat,
            },
        ))
    }
}

/// Solves `u = a + M (sat(u) - u)` by semismooth Newton on the piecewise
/// linear residual.
fn solve_input_loop(
    a: &Vector,
    m: &Matrix,
    spec: &super::SaturationSpec,
    t: f64,
) -> Result<Vector, SimError> {
    if m.iter().all(|v| *v == 0.0) {
        return Ok(a.clone());
    }
    let n = a.len();
    let scale = a.norm().max(1.0);
    let residual = |u: &Vector| u - a - m * (saturate_vec(u, spec) - u);
    let mut u = a.clone();
    let mut f = residual(&u);
    for _ in 0..LOOP_MAX_ITER {
        if f.norm() <= LOOP_TOL * scale {
            return Ok(u);
        }
        // d sat / du is 1 strictly inside the bounds and 0 outside
        let mut jac = Matrix::identity(n, n) + m;
        for j in 0..n {
            if u[j] > spec.lower[j] && u[j] < spec.upper[j] {
                for i in 0..n {
                    jac[(i, j)] -= m[(i, j)];
                }
            }
        }
        let step = solve(&jac, &Matrix::from_column_slice(n, 1, f.as_slice())).map_err(|_| {
            SimError::AlgebraicLoop {
                time: t,
                residual: f.norm(),
            }
        })?;
        let mut lambda = 1.0;
        let f0 = f.norm();
        loop {
            let cand = &u - step.column(0) * lambda;
            let fc = residual(&cand);
            if fc.norm() < f0 || lambda < 1e-4 {
                u = cand;
                f = fc;
                break;
            }
            lambda *= 0.5;
        }
    }
    if f.norm() <= LOOP_TOL * scale {
        Ok(u)
    } else {
        Err(SimError::AlgebraicLoop {
            time: t,
            residual: f.norm(),
        })
    }
}

fn push(dst: &mut Vec<Vec<f64>>, v: &Vector) {
    dst.push(v.iter().copied().collect());
}

/// Runs the loop with classic fourth-order Runge-Kutta. Saturations and the
/// input algebraic loop are evaluated at every stage. Time-dependent inputs
/// (reference, disturbance, the plant's own `t`) are held at their value at
/// the step midpoint, which is exact for piecewise-constant signals.
pub fn simulate(cfg: &LoopConfig) -> Result<SimulationTrace, SimError> {
    cfg.validate()?;
    let prep = Prepared::new(cfg);
    let steps = (cfg.horizon / cfg.step - 1e-9).ceil().max(1.0) as usize;
    let h = cfg.step;
    let mut z = Vector::zeros(prep.dim());
    if let Some(x0) = &cfg.plant_x0 {
        z.rows_mut(0, prep.np).copy_from_slice(x0);
    }
    if let Some(x0) = &cfg.controller_x0 {
        z.rows_mut(prep.np, prep.nk).copy_from_slice(x0);
    }
    let mut trace = SimulationTrace {
        tracking: cfg.tracking.clone(),
        ..Default::default()
    };
    let record = |trace: &mut SimulationTrace, t: f64, z: &Vector, s: &Sample| {
        trace.time.push(t);
        trace.x.push(z.rows(0, prep.np).iter().copied().collect());
        push(&mut trace.y, &s.y);
        push(&mut trace.y_hat, &s.y_hat);
        push(&mut trace.y_meas, &s.y_meas);
        push(&mut trace.r, &s.r);
        push(&mut trace.u_c, &s.u_c);
        push(&mut trace.u_my, &s.u_my);
        push(&mut trace.u_mu, &s.u_mu);
        push(&mut trace.u, &s.u);
        push(&mut trace.u_hat, &s.u_hat);
    };
    let mut last_valid = 0.0;
    for kstep in 0..steps {
        let t = kstep as f64 * h;
        let (_, sample) = prep.evaluate(t, &z)?;
        record(&mut trace, t, &z, &sample);
        // exogenous time held at the midpoint: a jump on the grid point t + h
        // belongs to the next step
        let tm = t + 0.5 * h;
        let (k1, _) = prep.evaluate(tm, &z)?;
        let (k2, _) = prep.evaluate(tm, &(&z + &k1 * (0.5 * h)))?;
        let (k3, _) = prep.evaluate(tm, &(&z + &k2 * (0.5 * h)))?;
        let (k4, _) = prep.evaluate(tm, &(&z + &k3 * h))?;
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite {
                time: t + h,
                last_valid,
            });
        }
        last_valid = t + h;
    }
    let t_end = steps as f64 * h;
    let (_, sample) = prep.evaluate(t_end, &z)?;
    record(&mut trace, t_end, &z, &sample);
    Ok(trace)
}

/// Response of the unsaturated loop computed independently of the RK4 path:
/// the plant/controller interconnection is assembled with
/// [`Network`](crate::lti::Network) and propagated exactly with matrix
/// exponentials between breakpoints of the piecewise-constant inputs.
/// Returns `[y_meas; y; u]` per sample on the simulator's time grid.
/// Requires a linear plant.
pub fn step_response_oracle(cfg: &LoopConfig) -> Result<Vec<Vec<f64>>, SimError> {
    cfg.validate()?;
    let plant = match &cfg.plant {
        super::Plant::Linear(p) => p,
        super::Plant::Nonlinear(_) => {
            return Err(SimError::Config("oracle requires a linear plant".into()))
        }
    };
    let nu = plant.ninputs;
    let nw = plant.model.ninputs() - nu;
    let nm = plant.nmeasured;
    let ny = plant.model.noutputs();
    let k = &cfg.nominal_controller;
    let mut net = Network::new();
    let gp = net.add("plant", &plant.model);
    let kp = net.add("controller", k);
    let r = net.inputs("r", nm);
    let w = net.inputs("w", nw);
    for i in 0..nm {
        net.feed(r[i], kp, i, 1.0);
        net.link(gp, i, kp, i, -1.0);
    }
    for j in 0..nu {
        net.link(kp, j, gp, j, 1.0);
    }
    for j in 0..nw {
        net.feed(w[j], gp, nu + j, 1.0);
    }
    let outs = net.outputs("out", ny + nu);
    for i in 0..ny {
        net.tap(outs[i], Source::Part(gp, i), 1.0);
    }
    for j in 0..nu {
        net.tap(outs[ny + j], Source::Part(kp, j), 1.0);
    }
    let cl: StateSpaceModel = net.build()?;
    let n = cl.nstates();
    let ni = nm + nw;
    let mut xs = Vector::zeros(n);
    if let Some(x0) = &cfg.plant_x0 {
        xs.rows_mut(0, plant.model.nstates()).copy_from_slice(x0);
    }
    if let Some(x0) = &cfg.controller_x0 {
        xs.rows_mut(plant.model.nstates(), k.nstates()).copy_from_slice(x0);
    }
    let steps = (cfg.horizon / cfg.step - 1e-9).ceil().max(1.0) as usize;
    let h = cfg.step;
    let input_at = |t: f64| {
        let mut v = Vector::zeros(ni);
        v.rows_mut(0, nm).copy_from(&cfg.reference.value(t));
        v.rows_mut(nm, nw).copy_from(&cfg.disturbance.value(t));
        v
    };
    // exact propagator over an interval of length tau with constant input
    let propagate = |x: &Vector, v: &Vector, tau: f64| -> Vector {
        if tau <= 0.0 {
            return x.clone();
        }
        let mut aug = Matrix::zeros(n + ni, n + ni);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&cl.a * tau));
        aug.view_mut((0, n), (n, ni)).copy_from(&(&cl.b * tau));
        let e = aug.exp();
        e.view((0, 0), (n, n)) * x + e.view((0, n), (n, ni)) * v
    };
    let mut breaks: Vec<f64> = cfg
        .reference
        .breakpoints()
        .into_iter()
        .chain(cfg.disturbance.breakpoints())
        .collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::with_capacity(steps + 1);
    let emit = |x: &Vector, t: f64| -> Vec<f64> {
        (&cl.c * x + &cl.d * input_at(t)).iter().copied().collect()
    };
    out.push(emit(&xs, 0.0));
    for kstep in 0..steps {
        let t0 = kstep as f64 * h;
        let t1 = t0 + h;
        let mut t = t0;
        for &b in breaks.iter().filter(|b| **b > t0 && **b < t1) {
            xs = propagate(&xs, &input_at(t), b - t);
            t = b;
        }
        xs = propagate(&xs, &input_at(t), t1 - t);
        out.push(emit(&xs, t1));
    }
    Ok(out)
}
