//! State anti-windup (SANTW) synthesis conditions.
//!
//! Signal convention: the compensator is driven by the state saturation error
//! `xhat - x` and its output `u_m` is added to the nominal command, so the plant
//! obeys `dx/dt = A x + B u_c + B u_m`. The performance channels are
//! `z1 = xhat - x` (weight `beta`) and `z2 = u_m` (weight `alpha`); the
//! disturbances are `u_c` (level `gamma_uc`) and `xhat` (level `gamma_xhat`).
//! The `xhat` level multiplies the Lyapunov matrix in the congruence-transformed
//! condition and is handled by the `Q_c` linearization and bisection.

use super::affine::AffineMatrix;
use super::problem::{solve_sdp, LmiProblem, SdpOptions, SdpSolution};
use super::LmiError;
use crate::lti::{is_hurwitz, StateSpaceModel};
use crate::matrix::{
    block, eigenvalues, inverse, max_symmetric_eigenvalue, min_symmetric_eigenvalue, rows_serde,
    symmetrize, Matrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SantwWeights {
    /// Weight on the compensator output energy.
    pub alpha: f64,
    /// Weight on the state saturation error energy.
    pub beta: f64,
    /// Attenuation level on the nominal command channel.
    pub gamma_uc: f64,
}

impl SantwWeights {
    pub fn new(alpha: f64, beta: f64, gamma_uc: f64) -> Result<Self, LmiError> {
        let w = Self {
            alpha,
            beta,
            gamma_uc,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), LmiError> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma_uc", self.gamma_uc),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LmiError::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_plant(a: &Matrix, b: &Matrix) -> Result<(usize, usize), LmiError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || n == 0 {
        return Err(LmiError::Dimension(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok((n, b.ncols()))
}

fn check_qc(qc: &Matrix, n: usize) -> Result<(), LmiError> {
    if qc.shape() != (n, n) {
        return Err(LmiError::Dimension(format!("Qc must be {n}x{n}")));
    }
    if min_symmetric_eigenvalue(&symmetrize(qc))? <= 0.0 {
        return Err(LmiError::Parameter("Qc must be positive definite".into()));
    }
    Ok(())
}

fn check_gamma(g: f64) -> Result<(), LmiError> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(LmiError::Parameter(format!("gamma_xhat must be positive, got {g}")));
    }
    Ok(())
}

fn c(m: &Matrix) -> AffineMatrix {
    AffineMatrix::constant(m.clone())
}

fn eye(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

/// `-g (Q Qc + Qc Q - Qc Qc)`, the linearized upper bound of `-g Q Q`.
fn linearized_square(q: &AffineMatrix, qc: &Matrix, g: f64) -> AffineMatrix {
    (&(q.right_mul(qc) + q.left_mul(qc)) - &c(&(qc * qc))).scale(-g)
}

/// Static SANTW condition for fixed `gamma_xhat` and linearization point `Qc`.
#[derive(Debug, Clone)]
pub struct Theorem1Lmi {
    pub problem: LmiProblem,
    pub q: AffineMatrix,
    pub y: AffineMatrix,
    pub j: AffineMatrix,
}

/// Block row sizes of the static condition: `(n, m, n, n, m)`.
pub fn theorem1_block_sizes(n: usize, m: usize) -> [usize; 5] {
    [n, m, n, n, m]
}

pub fn build_theorem1(
    a: &Matrix,
    b: &Matrix,
    w: &SantwWeights,
    gamma_xhat: f64,
    qc: &Matrix,
) -> Result<Theorem1Lmi, LmiError> {
    let (n, m) = check_plant(a, b)?;
    w.validate()?;
    check_gamma(gamma_xhat)?;
    check_qc(qc, n)?;
    let mut p = LmiProblem::new();
    let q = p.symmetric("Q", n);
    let y = p.full("Y", m, n);
    let (al, be) = (w.alpha, w.beta);
    let by = y.left_mul(b);
    let j11 = &q.left_mul(a).sym() - &by.sym();
    let z = |r, k| AffineMatrix::zeros(r, k);
    let j = AffineMatrix::block(&[
        vec![j11, c(b), by.clone(), q.scale(-be), y.transpose().scale(-al)],
        vec![c(&b.transpose()), c(&(-eye(m) * w.gamma_uc)), z(m, n), z(m, n), z(m, m)],
        vec![
            by.transpose(),
            z(n, m),
            linearized_square(&q, qc, gamma_xhat),
            q.scale(be),
            y.transpose().scale(al),
        ],
        vec![q.scale(-be), z(n, m), q.scale(be), c(&(-eye(n) * be)), z(n, m)],
        vec![y.scale(-al), z(m, m), y.scale(al), z(m, n), c(&(-eye(m) * al))],
    ]);
    p.less_than_zero("J", j.clone())?;
    p.greater_than_zero("Q", q.clone())?;
    Ok(Theorem1Lmi { problem: p, q, y, j })
}

/// Layout of the `(1,1)` block of the dynamic condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma11Layout {
    /// `A~ Q + Q A~^T` expanded from the augmented dynamics with the structured `Q`.
    #[default]
    Derived,
    /// Alternate top row `[A Q1 - B Y2, h1 A Q1 - B (h1 Y1 + h2 Y2)]`.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub h1: f64,
    pub h2: f64,
}

impl ShapeParams {
    pub fn new(h1: f64, h2: f64) -> Result<Self, LmiError> {
        if !(h1 > 0.0 && h2 > h1 * h1 && h2.is_finite()) {
            return Err(LmiError::Parameter(format!(
                "require h2 > h1^2 > 0, got h1={h1}, h2={h2}"
            )));
        }
        Ok(Self { h1, h2 })
    }

    /// Default search grid over `{0.1, 0.3, 0.5} x {1, 2, 5}`.
    pub fn default_grid() -> Vec<Self> {
        let mut out = Vec::new();
        for h1 in [0.1, 0.3, 0.5] {
            for h2 in [1.0, 2.0, 5.0] {
                if let Ok(s) = Self::new(h1, h2) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// `[[Q1, h1 Q1], [h1 Q1, h2 Q1]]`.
    pub fn structured(&self, q1: &Matrix) -> Matrix {
        block(&[
            vec![q1.clone(), q1 * self.h1],
            vec![q1 * self.h1, q1 * self.h2],
        ])
        .expect("square blocks")
    }
}

#[derive(Debug, Clone)]
pub struct Theorem2Lmi {
    pub problem: LmiProblem,
    pub q1: AffineMatrix,
    pub gamma: AffineMatrix,
}

/// Block row sizes of the dynamic condition: `(2n, m, n, n + m)`.
pub fn theorem2_block_sizes(n: usize, m: usize) -> [usize; 4] {
    [2 * n, m, n, n + m]
}

/// Per-solve settings of the dynamic condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Config {
    pub shape: ShapeParams,
    pub layout: Gamma11Layout,
    /// Optional bound `kappa` imposing `[[kappa Q1, YA^T], [YA, kappa Q1]] > 0`
    /// (spectral radius of `A_q` below `kappa`) and
    /// `[[kappa Q1, Y2^T], [Y2, kappa I]] > 0`.
    pub rate_bound: Option<f64>,
}

/// Dynamic SANTW condition with compensator order `n` and `B_q = I`.
/// Variables: `Q1` (symmetric), `Y1`, `Y2` (`m x n`), `YA` (`n x n`).
pub fn build_theorem2(
    a: &Matrix,
    b: &Matrix,
    w: &SantwWeights,
    gamma_xhat: f64,
    cfg: &Theorem2Config,
    qc: &Matrix,
) -> Result<Theorem2Lmi, LmiError> {
    let (n, m) = check_plant(a, b)?;
    w.validate()?;
    check_gamma(gamma_xhat)?;
    let h = ShapeParams::new(cfg.shape.h1, cfg.shape.h2)?;
    let layout = cfg.layout;
    check_qc(qc, n)?;
    let (h1, h2) = (h.h1, h.h2);
    let (al, be) = (w.alpha, w.beta);
    let mut p = LmiProblem::new();
    let q1 = p.symmetric("Q1", n);
    let y1 = p.full("Y1", m, n);
    let y2 = p.full("Y2", m, n);
    let ya = p.full("YA", n, n);
    let aq1 = q1.left_mul(a);
    let by1 = y1.left_mul(b);
    let by2 = y2.left_mul(b);
    let (t11, t12) = match layout {
        Gamma11Layout::Derived => (
            &(&aq1 - &by1) + &by2.scale(h1),
            &(&aq1.scale(h1) - &by1.scale(h1)) + &by2.scale(h2),
        ),
        Gamma11Layout::Printed => (
            &aq1 - &by2,
            &aq1.scale(h1) - &(&by1.scale(h1) + &by2.scale(h2)),
        ),
    };
    let t21 = &(-&q1) + &ya.scale(h1);
    let t22 = &q1.scale(-h1) + &ya.scale(h2);
    let g11 = AffineMatrix::block(&[vec![t11, t12], vec![t21, t22]]).sym();
    let z = |r, k| AffineMatrix::zeros(r, k);
    let bu = c(&block(&[vec![b.clone()], vec![Matrix::zeros(n, m)]])?);
    let g13 = AffineMatrix::block(&[vec![by1.clone()], vec![q1.clone()]]);
    let g14 = AffineMatrix::block(&[
        vec![
            q1.scale(-be),
            (&y1.transpose().scale(-1.0) + &y2.transpose().scale(h1)).scale(al),
        ],
        vec![
            q1.scale(-be * h1),
            (&y1.transpose().scale(-h1) + &y2.transpose().scale(h2)).scale(al),
        ],
    ]);
    let g34 = AffineMatrix::block(&[vec![q1.scale(be), y1.transpose().scale(al)]]);
    let g44 = c(&block(&[
        vec![-eye(n) * be, Matrix::zeros(n, m)],
        vec![Matrix::zeros(m, n), -eye(m) * al],
    ])?);
    let gamma = AffineMatrix::block(&[
        vec![g11, bu.clone(), g13.clone(), g14.clone()],
        vec![bu.transpose(), c(&(-eye(m) * w.gamma_uc)), z(m, n), z(m, n + m)],
        vec![
            g13.transpose(),
            z(n, m),
            linearized_square(&q1, qc, gamma_xhat),
            g34.clone(),
        ],
        vec![g14.transpose(), z(n + m, m), g34.transpose(), g44],
    ]);
    p.less_than_zero("Gamma", gamma.clone())?;
    p.greater_than_zero("Q1", q1.clone())?;
    if let Some(k) = cfg.rate_bound {
        if !(k > 0.0 && k.is_finite()) {
            return Err(LmiError::Parameter(format!("rate bound must be positive, got {k}")));
        }
        let kq = q1.scale(k);
        p.greater_than_zero(
            "A_q bound",
            AffineMatrix::block(&[
                vec![kq.clone(), ya.transpose()],
                vec![ya.clone(), kq.clone()],
            ]),
        )?;
        p.greater_than_zero(
            "K_m2 bound",
            AffineMatrix::block(&[
                vec![kq, y2.transpose()],
                vec![y2.clone(), c(&(eye(m) * k))],
            ]),
        )?;
    }
    Ok(Theorem2Lmi {
        problem: p,
        q1,
        gamma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Algorithm1Options {
    pub seed: u64,
    /// Random SPD draws tried after the scaled identities.
    pub restart_budget: usize,
    pub max_iterations: usize,
    /// Stop when `|Q - Qc| <= tolerance * |Q|`.
    pub tolerance: f64,
    /// `gamma_xhat` at which candidate `Qc` are screened.
    pub gamma_initial: f64,
    /// Relative width at which the `gamma_xhat` bisection stops.
    pub bisection_tol: f64,
    /// Relative `gamma_xhat` decrease below which the iteration is declared stalled.
    pub stall_tol: f64,
    pub sdp: SdpOptions,
}

impl Default for Algorithm1Options {
    fn default() -> Self {
        Self {
            seed: 0,
            restart_budget: 200,
            max_iterations: 50,
            tolerance: 1e-6,
            gamma_initial: 1e3,
            bisection_tol: 1e-2,
            stall_tol: 1e-3,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Algorithm1Trace {
    /// Accepted `gamma_xhat` per iteration (non-increasing).
    pub gamma_history: Vec<f64>,
    /// `|Q - Qc| / |Q|` per iteration.
    pub step_history: Vec<f64>,
    /// Index of the `Qc` candidate that was first feasible (identity ladder first).
    pub start_index: usize,
    pub sdp_solves: usize,
}

struct Outcome {
    solution: SdpSolution,
    q: Matrix,
    qc: Matrix,
    gamma: f64,
    trace: Algorithm1Trace,
}

/// Scales tried on the identity before random draws.
const IDENTITY_LADDER: [f64; 7] = [1.0, 0.3, 0.1, 0.03, 0.01, 3.0, 10.0];

/// `s (G^T G + I)` with uniform `G` entries and a log-uniform scale
/// `s in [1e-3, 1e2]`; the feasible `Qc` scale varies with the weights.
fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let s = 10f64.powf(rng.gen_range(-3.0..2.0));
    (g.transpose() * g + eye(n)) * s
}

/// Candidate `k` of the `Qc` search: the identity ladder, then random draws.
fn qc_candidate(k: usize, rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    match IDENTITY_LADDER.get(k) {
        Some(s) => eye(n) * *s,
        None => random_spd(rng, n),
    }
}

/// `Qc` linearization loop shared by the static and dynamic designs.
/// `build(gamma, qc)` returns the problem; `qname` is the linearized variable.
fn run_algorithm1(
    n: usize,
    opts: &Algorithm1Options,
    qname: &str,
    build: &dyn Fn(f64, &Matrix) -> Result<LmiProblem, LmiError>,
) -> Result<Outcome, LmiError> {
    let feas_opts = SdpOptions {
        stop_at_feasible: true,
        ..opts.sdp.clone()
    };
    let mut solves = 0usize;
    let mut feasible = |g: f64, qc: &Matrix, o: &SdpOptions| -> Result<SdpSolution, LmiError> {
        solves += 1;
        Ok(solve_sdp(&build(g, qc)?, o))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_margin = f64::INFINITY;
    let mut start = None;
    let attempts = IDENTITY_LADDER.len() + opts.restart_budget;
    for k in 0..attempts {
        let qc = qc_candidate(k, &mut rng, n);
        let s = feasible(opts.gamma_initial, &qc, &feas_opts)?;
        best_margin = best_margin.min(s.margin);
        if s.is_feasible() {
            start = Some((k, qc));
            break;
        }
    }
    let (start_index, mut qc) = start.ok_or(LmiError::NoFeasibleStart {
        attempts,
        best_margin,
    })?;
    let mut hi = opts.gamma_initial;
    let mut gamma_history = Vec::new();
    let mut step_history = Vec::new();
    let mut last: Option<(SdpSolution, Matrix, Matrix)> = None;
    for _ in 0..opts.max_iterations {
        let mut lo = 0.0;
        while hi - lo > opts.bisection_tol * hi {
            let mid = 0.5 * (lo + hi);
            if feasible(mid, &qc, &feas_opts)?.is_feasible() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let sol = feasible(hi, &qc, &feas_opts)?;
        if !sol.is_feasible() {
            // The previous certificate stays valid; keep it.
            break;
        }
        let q = sol.variable(qname).expect("linearized variable is declared");
        let step = (&q - &qc).norm() / q.norm().max(f64::MIN_POSITIVE);
        let stalled = gamma_history
            .last()
            .is_some_and(|g: &f64| g - hi <= opts.stall_tol * g);
        gamma_history.push(hi);
        step_history.push(step);
        last = Some((sol, q.clone(), qc.clone()));
        if step <= opts.tolerance || stalled {
            break;
        }
        qc = q;
    }
    let (solution, q, qc) = last.ok_or(LmiError::NoFeasibleStart {
        attempts,
        best_margin,
    })?;
    let gamma = *gamma_history.last().expect("at least one accepted iteration");
    Ok(Outcome {
        solution,
        q,
        qc,
        gamma,
        trace: Algorithm1Trace {
            gamma_history,
            step_history,
            start_index,
            sdp_solves: solves,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticSantwDesign {
    #[serde(with = "rows_serde")]
    pub k_m: Matrix,
    #[serde(with = "rows_serde")]
    pub q: Matrix,
    #[serde(with = "rows_serde")]
    pub y: Matrix,
    /// Linearization point of the accepted certificate.
    #[serde(with = "rows_serde")]
    pub qc: Matrix,
    pub weights: SantwWeights,
    pub gamma_xhat: f64,
    pub certificate: SdpSolution,
    pub trace: Algorithm1Trace,
}

impl StaticSantwDesign {
    /// Lyapunov matrix `P = Q^-1`.
    pub fn p(&self) -> Result<Matrix, LmiError> {
        Ok(inverse(&self.q)?)
    }

    /// Static gain from `xhat - x` to `u_m`.
    pub fn compensator(&self) -> StateSpaceModel {
        StateSpaceModel::static_gain(self.k_m.clone())
    }
}

/// Static design by iterating the static condition over `Qc`, shrinking
/// `gamma_xhat` by bisection at every linearization point.
pub fn algorithm1_static(
    a: &Matrix,
    b: &Matrix,
    w: &SantwWeights,
    opts: &Algorithm1Options,
) -> Result<StaticSantwDesign, LmiError> {
    let (n, _) = check_plant(a, b)?;
    w.validate()?;
    let out = run_algorithm1(n, opts, "Q", &|g, qc| {
        Ok(build_theorem1(a, b, w, g, qc)?.problem)
    })?;
    let y = out.solution.variable("Y").expect("Y is declared");
    let k_m = &y * inverse(&out.q)?;
    Ok(StaticSantwDesign {
        k_m,
        q: out.q,
        y,
        qc: out.qc,
        weights: *w,
        gamma_xhat: out.gamma,
        certificate: out.solution,
        trace: out.trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicSantwDesign {
    #[serde(with = "rows_serde")]
    pub a_q: Matrix,
    #[serde(with = "rows_serde")]
    pub b_q: Matrix,
    #[serde(with = "rows_serde")]
    pub k_m1: Matrix,
    #[serde(with = "rows_serde")]
    pub k_m2: Matrix,
    #[serde(with = "rows_serde")]
    pub q1: Matrix,
    #[serde(with = "rows_serde")]
    pub qc: Matrix,
    pub shape: ShapeParams,
    pub layout: Gamma11Layout,
    pub weights: SantwWeights,
    pub gamma_xhat: f64,
    pub certificate: SdpSolution,
    pub trace: Algorithm1Trace,
}

impl DynamicSantwDesign {
    /// Compensator `(A_q, B_q, K_m2, K_m1)` from `xhat - x` to `u_m`.
    pub fn compensator(&self) -> StateSpaceModel {
        StateSpaceModel::new(
            self.a_q.clone(),
            self.b_q.clone(),
            self.k_m2.clone(),
            self.k_m1.clone(),
        )
        .expect("compensator dimensions are consistent")
    }

    /// Structured Lyapunov matrix inverse `Q`.
    pub fn q(&self) -> Matrix {
        self.shape.structured(&self.q1)
    }

    /// Augmented state matrix `[[A - B K_m1, B K_m2], [-B_q, A_q]]`.
    pub fn augmented_a(&self, a: &Matrix, b: &Matrix) -> Matrix {
        block(&[
            vec![a - b * &self.k_m1, b * &self.k_m2],
            vec![-&self.b_q, self.a_q.clone()],
        ])
        .expect("augmented blocks are consistent")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicOptions {
    /// Fixed `(h1, h2)`; `None` searches [`ShapeParams::default_grid`].
    pub shape: Option<ShapeParams>,
    pub layout: Gamma11Layout,
    /// See [`Theorem2Config::rate_bound`]. Without it the phase-I point drifts
    /// toward arbitrarily fast compensator poles.
    pub rate_bound: Option<f64>,
}

impl Default for DynamicOptions {
    fn default() -> Self {
        Self {
            shape: None,
            layout: Gamma11Layout::Derived,
            rate_bound: Some(20.0),
        }
    }
}

/// Dynamic design of order `n` with `B_q = I`. With a shape grid, the pair
/// reaching the smallest `gamma_xhat` wins (ties keep the earlier grid point).
pub fn algorithm1_dynamic(
    a: &Matrix,
    b: &Matrix,
    w: &SantwWeights,
    dyn_opts: &DynamicOptions,
    opts: &Algorithm1Options,
) -> Result<DynamicSantwDesign, LmiError> {
    let (n, _) = check_plant(a, b)?;
    w.validate()?;
    let shapes = match dyn_opts.shape {
        Some(s) => vec![ShapeParams::new(s.h1, s.h2)?],
        None => ShapeParams::default_grid(),
    };
    let mut best: Option<(ShapeParams, Outcome)> = None;
    let mut last_err = None;
    for h in shapes {
        let cfg = Theorem2Config {
            shape: h,
            layout: dyn_opts.layout,
            rate_bound: dyn_opts.rate_bound,
        };
        let run = run_algorithm1(n, opts, "Q1", &|g, qc| {
            Ok(build_theorem2(a, b, w, g, &cfg, qc)?.problem)
        });
        match run {
            Ok(out) => {
                if best.as_ref().map_or(true, |(_, o)| out.gamma < o.gamma) {
                    best = Some((h, out));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (shape, out) = match best {
        Some(b) => b,
        None => return Err(last_err.expect("grid is non-empty")),
    };
    let q1inv = inverse(&out.q)?;
    let var = |name: &str| out.solution.variable(name).expect("declared");
    Ok(DynamicSantwDesign {
        a_q: var("YA") * &q1inv,
        b_q: eye(n),
        k_m1: var("Y1") * &q1inv,
        k_m2: var("Y2") * &q1inv,
        q1: out.q,
        qc: out.qc,
        shape,
        layout: dyn_opts.layout,
        weights: *w,
        gamma_xhat: out.gamma,
        certificate: out.solution,
        trace: out.trace,
    })
}

/// Dissipation matrix before congruence for `dx/dt = A x + Bu u_c + Bs xhat`,
/// `z = C x + Ds xhat`, `z` weighted by `diag(beta I, alpha I)`:
/// `[[P A + A^T P, P Bu, P Bs, C^T W], [*, -g_uc I, 0, 0], [*, *, -g_x I, Ds^T W], [*, *, *, -W]]`.
#[allow(clippy::too_many_arguments)]
pub fn dissipation_matrix(
    p: &Matrix,
    a: &Matrix,
    bu: &Matrix,
    bs: &Matrix,
    cz: &Matrix,
    ds: &Matrix,
    w: &SantwWeights,
    gamma_xhat: f64,
) -> Result<Matrix, LmiError> {
    let (mu, ms, nz) = (bu.ncols(), bs.ncols(), cz.nrows());
    if nz != ms + mu {
        return Err(LmiError::Dimension("z must stack xhat - x and u_m".into()));
    }
    let mut wz = Matrix::zeros(nz, nz);
    for i in 0..nz {
        wz[(i, i)] = if i < ms { w.beta } else { w.alpha };
    }
    let z = Matrix::zeros;
    Ok(block(&[
        vec![p * a + a.transpose() * p, p * bu, p * bs, cz.transpose() * &wz],
        vec![(p * bu).transpose(), -eye(mu) * w.gamma_uc, z(mu, ms), z(mu, nz)],
        vec![(p * bs).transpose(), z(ms, mu), -eye(ms) * gamma_xhat, ds.transpose() * &wz],
        vec![&wz * cz, z(nz, mu), &wz * ds, -&wz],
    ])?)
}

/// Static-gain dissipation matrix with `P`, `K_m`.
pub fn static_dissipation_matrix(
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    p: &Matrix,
    w: &SantwWeights,
    gamma_xhat: f64,
) -> Result<Matrix, LmiError> {
    let n = a.nrows();
    let cz = block(&[vec![-eye(n)], vec![-k]])?;
    let ds = block(&[vec![eye(n)], vec![k.clone()]])?;
    dissipation_matrix(p, &(a - b * k), b, &(b * k), &cz, &ds, w, gamma_xhat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub passed: bool,
    /// Largest eigenvalue of the back-substituted dissipation matrix.
    pub max_eigenvalue: f64,
    /// Required bound: `max_eigenvalue <= -tolerance`.
    pub tolerance: f64,
    pub p_positive_definite: bool,
    pub closed_loop_hurwitz: bool,
    pub spectral_abscissa: f64,
    /// Smallest eigenvalue of `gamma (Q - Qc)^T (Q - Qc)`; the linearization is
    /// an upper bound when this is non-negative.
    pub linearization_min_eigenvalue: f64,
}

fn report(
    m: &Matrix,
    p: &Matrix,
    a_cl: &Matrix,
    q: &Matrix,
    qc: &Matrix,
    gamma: f64,
) -> Result<CertificateReport, LmiError> {
    let m = symmetrize(m);
    let max_eig = max_symmetric_eigenvalue(&m)?;
    let tol = 1e-9 * m.amax().max(1.0);
    let p_pd = min_symmetric_eigenvalue(&symmetrize(p))? > 0.0;
    let abscissa = eigenvalues(a_cl)?.abscissa();
    let d = q - qc;
    let lin = min_symmetric_eigenvalue(&symmetrize(&(d.transpose() * &d * gamma)))?;
    let lin_tol = 1e-12 * (q.norm() + qc.norm()).powi(2).max(1.0) * gamma;
    let hurwitz = abscissa < 0.0;
    Ok(CertificateReport {
        passed: max_eig <= -tol && p_pd && hurwitz && lin >= -lin_tol,
        max_eigenvalue: max_eig,
        tolerance: tol,
        p_positive_definite: p_pd,
        closed_loop_hurwitz: hurwitz,
        spectral_abscissa: abscissa,
        linearization_min_eigenvalue: lin,
    })
}

/// Checks gains `K_m` against a Lyapunov matrix `P` directly.
pub fn verify_static_gains(
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    p: &Matrix,
    w: &SantwWeights,
    gamma_xhat: f64,
) -> Result<CertificateReport, LmiError> {
    let m = static_dissipation_matrix(a, b, k, p, w, gamma_xhat)?;
    let q = inverse(p)?;
    report(&m, p, &(a - b * k), &q, &q, gamma_xhat)
}

/// Back-substitutes `P = Q^-1`, `K_m = Y Q^-1` into the unlinearized
/// dissipation matrix.
pub fn verify_static_certificate(
    d: &StaticSantwDesign,
    a: &Matrix,
    b: &Matrix,
) -> Result<CertificateReport, LmiError> {
    let p = d.p()?;
    let m = static_dissipation_matrix(a, b, &d.k_m, &p, &d.weights, d.gamma_xhat)?;
    report(&m, &p, &(a - b * &d.k_m), &d.q, &d.qc, d.gamma_xhat)
}

/// Dynamic counterpart with the structured `P = Q^-1` on the augmented state.
pub fn verify_dynamic_certificate(
    d: &DynamicSantwDesign,
    a: &Matrix,
    b: &Matrix,
) -> Result<CertificateReport, LmiError> {
    let n = a.nrows();
    let m = b.ncols();
    let at = d.augmented_a(a, b);
    let p = inverse(&d.q())?;
    let bu = block(&[vec![b.clone()], vec![Matrix::zeros(d.a_q.nrows(), m)]])?;
    let bs = block(&[vec![b * &d.k_m1], vec![d.b_q.clone()]])?;
    let cz = block(&[
        vec![-eye(n), Matrix::zeros(n, d.a_q.nrows())],
        vec![-&d.k_m1, d.k_m2.clone()],
    ])?;
    let ds = block(&[vec![eye(n)], vec![d.k_m1.clone()]])?;
    let mat = dissipation_matrix(&p, &at, &bu, &bs, &cz, &ds, &d.weights, d.gamma_xhat)?;
    report(&mat, &p, &at, &d.q1, &d.qc, d.gamma_xhat)
}

/// True when `A - B K` is Hurwitz.
pub fn closed_loop_hurwitz(a: &Matrix, b: &Matrix, k: &Matrix) -> bool {
    let n = a.nrows();
    StateSpaceModel::new(a - b * k, Matrix::zeros(n, 0), Matrix::zeros(0, n), Matrix::zeros(0, 0))
        .map(|s| is_hurwitz(&s, 0.0))
        .unwrap_or(false)
}
