//! Grid-connected voltage-source converter with an LCL filter, averaged and
//! written in the synchronous dq frame, with a power controller, a resistive
//! grid fault and joint input-state anti-windup against grid-current limits.

use crate::design::{CompensatorDesign, TransferDesign};
use crate::lti::{LtiError, StateSpaceModel};
use crate::matrix::{eigenvalues, from_rows, inverse, solve, Matrix, C64};
use crate::sim::{
    simulate, LoopConfig, Plant, PlantDynamics, PlantInput, SaturationSpec, SimError, Signal,
    SimulationTrace, Vector,
};
use crate::synth::{
    build_isantw_plant, synth_fixed_structure, synth_with_start, CompensatorStructure, SynthError, SynthOptions,
    SynthesisResult,
};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VscError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("nominal loop is unstable (spectral abscissa {abscissa})")]
    UnstableNominal { abscissa: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Converter and filter parameters. Defaults are a generic low-voltage
/// set, not measured data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VscParams {
    pub r1: f64,
    pub l1: f64,
    pub r2: f64,
    pub l2: f64,
    pub cf: f64,
    pub omega0: f64,
    pub vdc: f64,
    /// Grid voltage in the dq frame (amplitude-invariant, aligned with d).
    pub v_d: f64,
    pub v_q: f64,
}

impl Default for VscParams {
    fn default() -> Self {
        Self {
            r1: 0.005,
            l1: 5e-3,
            r2: 0.005,
            l2: 5e-3,
            cf: 50e-6,
            omega0: 2.0 * std::f64::consts::PI * 50.0,
            vdc: 800.0,
            // 400 V line-to-line rms as a phase peak
            v_d: 400.0 * (2.0f64 / 3.0).sqrt(),
            v_q: 0.0,
        }
    }
}

impl VscParams {
    pub fn validate(&self) -> Result<(), VscError> {
        for (name, v) in [
            ("l1", self.l1),
            ("l2", self.l2),
            ("cf", self.cf),
            ("omega0", self.omega0),
            ("vdc", self.vdc),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(VscError::Parameter(format!("{name} must be positive")));
            }
        }
        if !(self.r1 >= 0.0 && self.r2 >= 0.0) {
            return Err(VscError::Parameter("resistances must be non-negative".into()));
        }
        Ok(())
    }

    pub fn grid_voltage(&self) -> [f64; 2] {
        [self.v_d, self.v_q]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VscState {
    pub i_d1: f64,
    pub i_q1: f64,
    pub i_gd: f64,
    pub i_gq: f64,
    pub v_cfd: f64,
    pub v_cfq: f64,
}

impl VscState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.i_d1, self.i_q1, self.i_gd, self.i_gq, self.v_cfd, self.v_cfq]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            i_d1: x[0],
            i_q1: x[1],
            i_gd: x[2],
            i_gq: x[3],
            v_cfd: x[4],
            v_cfq: x[5],
        }
    }
}

/// State derivative for modulation `m` and grid voltage `v`.
pub fn vsc_dynamics(x: &VscState, m: [f64; 2], v: [f64; 2], p: &VscParams) -> VscState {
    let w = p.omega0;
    VscState {
        i_d1: -p.r1 / p.l1 * x.i_d1 + w * x.i_q1 - x.v_cfd / p.l1 + 0.5 * m[0] * p.vdc / p.l1,
        i_q1: -p.r1 / p.l1 * x.i_q1 - w * x.i_d1 - x.v_cfq / p.l1 + 0.5 * m[1] * p.vdc / p.l1,
        i_gd: -p.r2 / p.l2 * x.i_gd + w * x.i_gq + x.v_cfd / p.l2 - v[0] / p.l2,
        i_gq: -p.r2 / p.l2 * x.i_gq - w * x.i_gd + x.v_cfq / p.l2 - v[1] / p.l2,
        v_cfd: x.i_d1 / p.cf - x.i_gd / p.cf + w * x.v_cfq,
        v_cfq: x.i_q1 / p.cf - x.i_gq / p.cf - w * x.v_cfd,
    }
}

/// `(A, B_m, B_v)` with `x' = A x + B_m m + B_v v`.
pub fn vsc_matrices(p: &VscParams) -> (Matrix, Matrix, Matrix) {
    let w = p.omega0;
    let a = from_rows(&[
        &[-p.r1 / p.l1, w, 0.0, 0.0, -1.0 / p.l1, 0.0],
        &[-w, -p.r1 / p.l1, 0.0, 0.0, 0.0, -1.0 / p.l1],
        &[0.0, 0.0, -p.r2 / p.l2, w, 1.0 / p.l2, 0.0],
        &[0.0, 0.0, -w, -p.r2 / p.l2, 0.0, 1.0 / p.l2],
        &[1.0 / p.cf, 0.0, -1.0 / p.cf, 0.0, 0.0, w],
        &[0.0, 1.0 / p.cf, 0.0, -1.0 / p.cf, -w, 0.0],
    ]);
    let mut bm = Matrix::zeros(6, 2);
    bm[(0, 0)] = 0.5 * p.vdc / p.l1;
    bm[(1, 1)] = 0.5 * p.vdc / p.l1;
    let mut bv = Matrix::zeros(6, 2);
    bv[(2, 0)] = -1.0 / p.l2;
    bv[(3, 1)] = -1.0 / p.l2;
    (a, bm, bv)
}

/// Active and reactive power delivered to the grid.
pub fn powers(v: [f64; 2], ig: [f64; 2]) -> (f64, f64) {
    (
        1.5 * (v[0] * ig[0] + v[1] * ig[1]),
        1.5 * (v[1] * ig[0] - v[0] * ig[1]),
    )
}

/// Resistive fault on the line between the converter terminal and the
/// stiff grid, seen at the terminal as a dq voltage sag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub resistance: f64,
    pub start: f64,
    pub end: f64,
    /// Line section between the grid source and the fault.
    pub line_resistance: f64,
    pub line_inductance: f64,
}

impl FaultScenario {
    pub fn new(resistance: f64, start: f64, end: f64) -> Result<Self, VscError> {
        let f = Self {
            resistance,
            start,
            end,
            line_resistance: 0.05,
            line_inductance: 1e-3,
        };
        f.validate()?;
        Ok(f)
    }

    /// A window with `start == end` is allowed and has no effect.
    pub fn validate(&self) -> Result<(), VscError> {
        if !(self.resistance > 0.0) {
            return Err(VscError::Parameter("fault resistance must be positive".into()));
        }
        if !(self.start <= self.end) {
            return Err(VscError::Parameter("fault must end after it starts".into()));
        }
        if !(self.line_resistance >= 0.0 && self.line_inductance >= 0.0)
            || self.line_resistance + self.line_inductance == 0.0
        {
            return Err(VscError::Parameter("line impedance must be non-zero".into()));
        }
        Ok(())
    }

    /// `R_f / (R_f + R_l + j w0 L_l)`.
    pub fn sag_factor(&self, omega0: f64) -> C64 {
        let zf = C64::new(self.resistance, 0.0);
        zf / (zf + C64::new(self.line_resistance, omega0 * self.line_inductance))
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    /// Terminal voltage at time `t`.
    pub fn voltage(&self, t: f64, p: &VscParams) -> [f64; 2] {
        if !self.is_active(t) {
            return p.grid_voltage();
        }
        let v = self.sag_factor(p.omega0) * C64::new(p.v_d, p.v_q);
        [v.re, v.im]
    }
}

/// Plant view for the simulator: input `(m_d, m_q)`; measured
/// `(P, Q, i_cd, i_cq)` with `i_c = i_1 - i_g` the capacitor current;
/// constrained `(i_gd, i_gq)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VscPlant {
    pub params: VscParams,
    pub fault: Option<FaultScenario>,
}

impl VscPlant {
    pub fn voltage(&self, t: f64) -> [f64; 2] {
        match &self.fault {
            Some(f) => f.voltage(t, &self.params),
            None => self.params.grid_voltage(),
        }
    }
}

impl PlantDynamics for VscPlant {
    fn nstates(&self) -> usize {
        6
    }
    fn ninputs(&self) -> usize {
        2
    }
    fn ndisturbances(&self) -> usize {
        0
    }
    fn nmeasured(&self) -> usize {
        4
    }
    fn nconstrained(&self) -> usize {
        2
    }
    fn derivative(&self, t: f64, x: &Vector, u: &Vector, _w: &Vector) -> Vector {
        let d = vsc_dynamics(
            &VscState::from_slice(x.as_slice()),
            [u[0], u[1]],
            self.voltage(t),
            &self.params,
        );
        Vector::from_column_slice(&d.to_array())
    }
    fn measured(&self, t: f64, x: &Vector, _w: &Vector) -> Vector {
        let (p, q) = powers(self.voltage(t), [x[2], x[3]]);
        Vector::from_column_slice(&[p, q, x[0] - x[2], x[1] - x[3]])
    }
    fn constrained(&self, _t: f64, x: &Vector, _w: &Vector) -> Vector {
        Vector::from_column_slice(&[x[2], x[3]])
    }
}

/// Measured outputs of [`VscPlant`] as a linear map at the nominal voltage.
fn measured_matrix(p: &VscParams) -> Matrix {
    let (vd, vq) = (p.v_d, p.v_q);
    from_rows(&[
        &[0.0, 0.0, 1.5 * vd, 1.5 * vq, 0.0, 0.0],
        &[0.0, 0.0, 1.5 * vq, -1.5 * vd, 0.0, 0.0],
        &[1.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0],
    ])
}

fn constrained_matrix() -> Matrix {
    from_rows(&[&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]])
}

/// Power controller: integral action on the power errors through the
/// inverse DC gain of the actively damped plant, a virtual resistance on the
/// grid current and a virtual resistance on the capacitor current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerControllerGains {
    /// Integral gain (rad/s) on the decoupled power errors.
    pub ki: f64,
    /// Virtual series resistance on the grid current (ohm).
    pub r_grid: f64,
    /// Virtual resistance on the capacitor current (ohm).
    pub r_cap: f64,
}

impl Default for PowerControllerGains {
    fn default() -> Self {
        Self {
            ki: 150.0,
            r_grid: 3.0,
            r_cap: 5.0,
        }
    }
}

/// Controller on `e = r - (P, Q, i_cd, i_cq)` producing `(m_d, m_q)`.
pub fn nominal_controller(p: &VscParams, g: &PowerControllerGains) -> Result<StateSpaceModel, VscError> {
    p.validate()?;
    let scale = 0.5 * p.vdc;
    // proportional part on the measured outputs, with e = -y for the currents
    let v2 = 1.5 * (p.v_d * p.v_d + p.v_q * p.v_q);
    if v2 == 0.0 {
        return Err(VscError::Parameter("grid voltage must be non-zero".into()));
    }
    // i_g recovered from (P, Q): i_gd = (vd P + vq Q)/v2, i_gq = (vq P - vd Q)/v2
    let ig_from_pq = from_rows(&[&[p.v_d / v2, p.v_q / v2], &[p.v_q / v2, -p.v_d / v2]]);
    let d_pq = &ig_from_pq * (g.r_grid / scale);
    let d_c = Matrix::identity(2, 2) * (g.r_cap / scale);
    // DC gain of the loop with the proportional terms closed
    let (a, bm, _) = vsc_matrices(p);
    let cm = measured_matrix(p);
    let mut dp = Matrix::zeros(2, 4);
    dp.view_mut((0, 0), (2, 2)).copy_from(&d_pq);
    dp.view_mut((0, 2), (2, 2)).copy_from(&d_c);
    let a_cl = &a - &bm * &dp * &cm;
    let g0 = -(cm.rows(0, 2) * solve(&a_cl, &bm).map_err(LtiError::from)?);
    let g0_inv = inverse(&g0).map_err(LtiError::from)?;
    // integrator states in modulation units
    let mut b = Matrix::zeros(2, 4);
    b.view_mut((0, 0), (2, 2)).copy_from(&(g0_inv * g.ki));
    Ok(StateSpaceModel::with_labels(
        Matrix::zeros(2, 2),
        b,
        Matrix::identity(2, 2),
        dp,
        vec!["e_p".into(), "e_q".into(), "e_icd".into(), "e_icq".into()],
        vec!["m_d".into(), "m_q".into()],
    )?)
}

/// Equilibrium `(x, m)` delivering `(p_ref, q_ref)` at the nominal voltage.
pub fn operating_point(p: &VscParams, p_ref: f64, q_ref: f64) -> Result<(VscState, [f64; 2]), VscError> {
    let (a, bm, bv) = vsc_matrices(p);
    let cm = measured_matrix(p);
    // [A Bm; C_pq 0] [x; m] = [-Bv v; (P, Q)]
    let mut lhs = Matrix::zeros(8, 8);
    lhs.view_mut((0, 0), (6, 6)).copy_from(&a);
    lhs.view_mut((0, 6), (6, 2)).copy_from(&bm);
    lhs.view_mut((6, 0), (2, 6)).copy_from(&cm.rows(0, 2));
    let v = Matrix::from_column_slice(2, 1, &p.grid_voltage());
    let mut rhs = Matrix::zeros(8, 1);
    rhs.view_mut((0, 0), (6, 1)).copy_from(&(-(&bv * &v)));
    rhs[(6, 0)] = p_ref;
    rhs[(7, 0)] = q_ref;
    let sol = solve(&lhs, &rhs).map_err(LtiError::from)?;
    Ok((VscState::from_slice(&sol.as_slice()[..6]), [sol[(6, 0)], sol[(7, 0)]]))
}

/// Scenario settings for the converter study. Missing fields take their
/// default values when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VscStudy {
    pub params: VscParams,
    pub gains: PowerControllerGains,
    /// Active power after the reference step (W).
    pub p_nominal: f64,
    pub q_ref: f64,
    pub step_time: f64,
    pub horizon: f64,
    pub step: f64,
    /// Grid-current limit per dq component as a multiple of the nominal
    /// current magnitude.
    pub current_limit_factor: f64,
    pub modulation_bound: f64,
}

impl Default for VscStudy {
    fn default() -> Self {
        Self {
            params: VscParams::default(),
            gains: PowerControllerGains::default(),
            p_nominal: 20e3,
            q_ref: 0.0,
            step_time: 0.08,
            horizon: 0.3,
            step: 1e-5,
            current_limit_factor: 1.2,
            modulation_bound: 1.0,
        }
    }
}

impl VscStudy {
    /// Steady grid-current magnitude at the nominal power.
    pub fn nominal_current(&self) -> Result<f64, VscError> {
        let (x, _) = operating_point(&self.params, self.p_nominal, self.q_ref)?;
        Ok(x.i_gd.hypot(x.i_gq))
    }

    pub fn current_limit(&self) -> Result<f64, VscError> {
        Ok(self.current_limit_factor * self.nominal_current()?)
    }

    fn reference(&self) -> Signal {
        Signal::Step {
            time: self.step_time,
            before: vec![0.0, self.q_ref, 0.0, 0.0],
            after: vec![self.p_nominal, self.q_ref, 0.0, 0.0],
        }
    }
}

/// Linear constrained-output model `m -> (i_gd, i_gq)`.
pub fn current_model(p: &VscParams) -> Result<StateSpaceModel, VscError> {
    let (a, bm, _) = vsc_matrices(p);
    Ok(StateSpaceModel::with_labels(
        a,
        bm,
        constrained_matrix(),
        Matrix::zeros(2, 2),
        vec!["m_d".into(), "m_q".into()],
        vec!["i_gd".into(), "i_gq".into()],
    )?)
}

/// Spectral abscissa of the unsaturated nominal loop at the nominal voltage.
pub fn nominal_abscissa(p: &VscParams, k: &StateSpaceModel) -> Result<f64, VscError> {
    let (a, bm, _) = vsc_matrices(p);
    let cm = measured_matrix(p);
    let nk = k.nstates();
    // e = r - Cm x, m = Ck xk + Dk e
    let mut acl = Matrix::zeros(6 + nk, 6 + nk);
    acl.view_mut((0, 0), (6, 6)).copy_from(&(&a - &bm * &k.d * &cm));
    acl.view_mut((0, 6), (6, nk)).copy_from(&(&bm * &k.c));
    acl.view_mut((6, 0), (nk, 6)).copy_from(&(-(&k.b * &cm)));
    acl.view_mut((6, 6), (nk, nk)).copy_from(&k.a);
    Ok(eigenvalues(&acl).map_err(LtiError::from)?.abscissa())
}

/// Loop with the power controller, grid-current saturation, modulation
/// limits and an optional compensator, started at the zero-power
/// equilibrium. The converter applies the saturated modulation.
pub fn build_vsc_loop(
    study: &VscStudy,
    design: Option<&CompensatorDesign>,
    fault: Option<FaultScenario>,
) -> Result<LoopConfig, VscError> {
    let p = &study.params;
    p.validate()?;
    if let Some(f) = &fault {
        f.validate()?;
    }
    let k = nominal_controller(p, &study.gains)?;
    let abscissa = nominal_abscissa(p, &k)?;
    if abscissa >= 0.0 {
        return Err(VscError::UnstableNominal { abscissa });
    }
    let (x0, m0) = operating_point(p, 0.0, study.q_ref)?;
    // controller state giving m0 with e = (0, 0, -i_c)
    let e0 = Matrix::from_column_slice(4, 1, &[0.0, 0.0, x0.i_gd - x0.i_d1, x0.i_gq - x0.i_q1]);
    let m0v = Matrix::from_column_slice(2, 1, &m0);
    let xk0 = solve(&k.c, &(&m0v - &k.d * &e0)).map_err(LtiError::from)?;
    let plant = VscPlant {
        params: *p,
        fault,
    };
    let mut cfg = LoopConfig::new(
        Plant::Nonlinear(Arc::new(plant)),
        k,
        study.reference(),
        study.horizon,
        study.step,
    );
    let lim = study.current_limit()?;
    cfg.state_sat = SaturationSpec::symmetric(&[lim, lim])?;
    let mb = study.modulation_bound;
    cfg.input_sat = Some(SaturationSpec::symmetric(&[mb, mb])?);
    cfg.plant_input = PlantInput::Saturated;
    cfg.plant_x0 = Some(x0.to_array().to_vec());
    cfg.controller_x0 = Some(xk0.as_slice().to_vec());
    cfg.tracking = vec![0, 1];
    if let Some(d) = design {
        cfg.anti_windup = Some(d.to_anti_windup().map_err(|e| match e {
            crate::design::DesignError::Sim(s) => VscError::Sim(s),
            crate::design::DesignError::Lti(l) => VscError::Lti(l),
            other => VscError::Parameter(other.to_string()),
        })?);
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VscMetrics {
    /// Largest grid-current magnitude over the run (A).
    pub peak_grid_current: f64,
    /// Largest grid-current magnitude inside the fault window (A).
    pub peak_fault_current: f64,
    /// Integral of the squared grid-current magnitude over the fault window.
    pub fault_current_energy: f64,
    /// Largest commanded and applied modulation component.
    pub peak_command_modulation: f64,
    pub peak_applied_modulation: f64,
    /// Time after fault clearance until `|P - P_ref|` stays within 2% of
    /// the nominal power; `None` if it never settles.
    pub recovery_time: Option<f64>,
    pub current_limit: f64,
}

/// Band for [`VscMetrics::recovery_time`], relative to the nominal power.
pub const RECOVERY_BAND: f64 = 0.02;

pub fn vsc_metrics(trace: &SimulationTrace, study: &VscStudy, fault: Option<&FaultScenario>) -> Result<VscMetrics, VscError> {
    let mag = |k: usize| trace.x[k][2].hypot(trace.x[k][3]);
    let n = trace.len();
    let in_window = |t: f64| fault.is_some_and(|f| t >= f.start && t <= f.end);
    let mut peak = 0.0f64;
    let mut peak_fault = 0.0f64;
    let mut energy = 0.0;
    for k in 0..n {
        peak = peak.max(mag(k));
        if in_window(trace.time[k]) {
            peak_fault = peak_fault.max(mag(k));
            if k + 1 < n && in_window(trace.time[k + 1]) {
                let dt = trace.time[k + 1] - trace.time[k];
                energy += 0.5 * dt * (mag(k).powi(2) + mag(k + 1).powi(2));
            }
        }
    }
    let peak_of = |v: &Vec<Vec<f64>>| v.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let clear = fault.map_or(study.step_time, |f| f.end);
    let band = RECOVERY_BAND * study.p_nominal.abs();
    let mut last_out = None;
    for k in 0..n {
        if trace.time[k] >= clear && (trace.y_meas[k][0] - trace.r[k][0]).abs() > band {
            last_out = Some(k);
        }
    }
    let recovery_time = match last_out {
        None => Some(0.0),
        Some(k) if k + 1 < n => Some(trace.time[k + 1] - clear),
        Some(_) => None,
    };
    Ok(VscMetrics {
        peak_grid_current: peak,
        peak_fault_current: peak_fault,
        fault_current_energy: energy,
        peak_command_modulation: peak_of(&trace.u),
        peak_applied_modulation: peak_of(&trace.u_hat),
        recovery_time,
        current_limit: study.current_limit()?,
    })
}

/// Simulates the study with the fault and returns the trace and metrics.
pub fn run_fault_study(
    scenario: &FaultScenario,
    study: &VscStudy,
    design: Option<&CompensatorDesign>,
) -> Result<(SimulationTrace, VscMetrics), VscError> {
    let cfg = build_vsc_loop(study, design, Some(*scenario))?;
    let trace = simulate(&cfg)?;
    let m = vsc_metrics(&trace, study, Some(scenario))?;
    Ok((trace, m))
}

/// Weights and structure for the converter anti-windup design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VscDesignOptions {
    /// Zero and pole (rad/s) of the first-order weight on both saturation
    /// errors, with unit high-frequency gain.
    pub weight_zero: f64,
    pub weight_pole: f64,
    pub order: usize,
    pub synth: SynthOptions,
}

impl Default for VscDesignOptions {
    fn default() -> Self {
        Self {
            weight_zero: 2000.0,
            weight_pole: 200.0,
            order: 1,
            synth: SynthOptions {
                starts: 4,
                max_evaluations: 1500,
                ..SynthOptions::default()
            },
        }
    }
}

fn lead_lag(z: f64, p: f64, n: usize) -> StateSpaceModel {
    let a = Matrix::identity(n, n) * -p;
    let b = Matrix::identity(n, n);
    let c = Matrix::identity(n, n) * (z - p);
    let d = Matrix::identity(n, n);
    StateSpaceModel::new(a, b, c, d).expect("diagonal weight dimensions")
}

/// Diagonal joint input-state compensator for the converter, synthesized
/// in per-unit (currents over the limit, powers over the nominal power) and
/// returned in physical units.
pub fn design_vsc_antiwindup(
    study: &VscStudy,
    opts: &VscDesignOptions,
) -> Result<(TransferDesign, SynthesisResult), VscError> {
    let p = &study.params;
    let k = nominal_controller(p, &study.gains)?;
    let i_base = study.current_limit()?;
    let p_base = study.p_nominal.abs().max(1.0);
    let e_base = [p_base, p_base, i_base, i_base];
    let g = current_model(p)?.left_mul(&(Matrix::identity(2, 2) / i_base))?;
    let k_pu = k.right_mul(&Matrix::from_diagonal(&Vector::from_column_slice(&e_base)))?;
    let w = lead_lag(opts.weight_zero, opts.weight_pole, 2);
    let plant = build_isantw_plant(&g, &k_pu, &w, &w)?;
    // static design first, then raise the order from it
    let blocks = [(2, 2), (2, 4)];
    let s0 = CompensatorStructure::block_diagonal(&blocks, &[0, 0]);
    let mut r = synth_fixed_structure(&plant, &s0, &opts.synth)?;
    if opts.order > 0 {
        let s = CompensatorStructure::block_diagonal(&blocks, &[opts.order, opts.order]);
        let start = s.embed(&s0, &r.params);
        r = synth_with_start(&plant, &s, start, &opts.synth)?;
    }
    let in_scale = Vector::from_column_slice(&[1.0 / i_base, 1.0 / i_base, 1.0, 1.0]);
    let out_scale = Vector::from_column_slice(&[1.0, 1.0, e_base[0], e_base[1], e_base[2], e_base[3]]);
    let model = r
        .compensator
        .right_mul(&Matrix::from_diagonal(&in_scale))?
        .left_mul(&Matrix::from_diagonal(&out_scale))?;
    let mut t = r.to_transfer_design(2, 2);
    t.model = model;
    t.structure = format!("vsc_{}", r.structure.name);
    Ok((t, r))
}

#[cfg(test)]
mod tests;
