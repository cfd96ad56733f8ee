//! Fixed-step simulation of saturated anti-windup loops.
//!
//! Loop signals (all vectors):
//! - plant: `x' = f(t, x, u_p, w)`, measured output `y_m`, constrained output `y_s`
//! - constrained output saturation: `y_hat = sat(y_s)`; the plant itself is not clipped
//! - nominal controller: input `e + u_mu` with `e = r - y_m`, output `u_c`
//! - anti-windup compensator: input `[y_hat - y_s; u_hat - u]`, output `[u_my; u_mu]`
//! - command `u = u_c + u_my`, `u_hat = sat(u)`; the plant receives `u` or
//!   `u_hat` depending on [`PlantInput`].

mod engine;
mod metrics;

pub use engine::{simulate, step_response_oracle};
pub use metrics::{dissipation_check, metrics, DissipationReport, MetricsReport};

use crate::lti::{LtiError, StateSpaceModel};
use crate::matrix::Matrix;
use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::sync::Arc;
use thiserror::Error;

pub type Vector = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error("non-finite state at t = {time}; last valid sample at t = {last_valid}")]
    NonFinite { time: f64, last_valid: f64 },
    #[error("input/saturation algebraic loop did not converge at t = {time} (residual {residual:.3e})")]
    AlgebraicLoop { time: f64, residual: f64 },
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error("export failed: {0}")]
    Export(String),
}

/// Per-channel bounds; an infinite bound disables that side of the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SaturationSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SimError> {
        if lower.len() != upper.len() {
            return Err(SimError::Config("saturation bound lengths differ".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l >= u {
                return Err(SimError::Config(format!(
                    "channel {i}: lower bound {l} must be below upper bound {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn symmetric(bounds: &[f64]) -> Result<Self, SimError> {
        Self::new(bounds.iter().map(|b| -b).collect(), bounds.to_vec())
    }

    /// Upper bounds only; lower bounds at minus infinity.
    pub fn upper_only(upper: &[f64]) -> Result<Self, SimError> {
        Self::new(vec![f64::NEG_INFINITY; upper.len()], upper.to_vec())
    }

    pub fn disabled(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn is_disabled(&self) -> bool {
        self.lower.iter().all(|l| l.is_infinite()) && self.upper.iter().all(|u| u.is_infinite())
    }
}

#[derive(Serialize, Deserialize)]
struct SaturationDoc {
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

// JSON has no infinities; unbounded sides are written as null.
impl Serialize for SaturationSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let f = |v: &f64| if v.is_finite() { Some(*v) } else { None };
        SaturationDoc {
            lower: self.lower.iter().map(f).collect(),
            upper: self.upper.iter().map(f).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SaturationSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = SaturationDoc::deserialize(d)?;
        SaturationSpec::new(
            doc.lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
            doc.upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
        )
        .map_err(|e| serde::de::Error::custom(e.to_string()))
    }
}

/// Componentwise clamp. Panics on a length mismatch.
pub fn saturate(v: &[f64], spec: &SaturationSpec) -> Vec<f64> {
    assert_eq!(v.len(), spec.len(), "saturate: dimension mismatch");
    v.iter()
        .zip(spec.lower.iter().zip(&spec.upper))
        .map(|(x, (l, u))| x.clamp(*l, *u))
        .collect()
}

pub(crate) fn saturate_vec(v: &Vector, spec: &SaturationSpec) -> Vector {
    Vector::from_iterator(
        v.len(),
        v.iter()
            .zip(spec.lower.iter().zip(&spec.upper))
            .map(|(x, (l, u))| x.clamp(*l, *u)),
    )
}

/// Time-dependent vector signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Constant { value: Vec<f64> },
    Step { time: f64, before: Vec<f64>, after: Vec<f64> },
    /// Piecewise constant: `values[k]` holds on `[times[k], times[k+1])`;
    /// before `times[0]` the first value holds.
    Piecewise { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Signal {
    pub fn zero(n: usize) -> Self {
        Signal::Constant {
            value: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Signal::Constant { value } => value.len(),
            Signal::Step { before, .. } => before.len(),
            Signal::Piecewise { values, .. } => values.first().map(|v| v.len()).unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            Signal::Constant { .. } => Ok(()),
            Signal::Step { before, after, .. } => {
                if before.len() != after.len() {
                    return Err(SimError::Config("step signal: lengths differ".into()));
                }
                Ok(())
            }
            Signal::Piecewise { times, values } => {
                if times.len() != values.len() || times.is_empty() {
                    return Err(SimError::Config(
                        "piecewise signal: need one value per breakpoint".into(),
                    ));
                }
                if times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(SimError::Config("piecewise signal: times must increase".into()));
                }
                let n = values[0].len();
                if values.iter().any(|v| v.len() != n) {
                    return Err(SimError::Config("piecewise signal: ragged values".into()));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, t: f64) -> Vector {
        match self {
            Signal::Constant { value } => Vector::from_column_slice(value),
            Signal::Step {
                time,
                before,
                after,
            } => Vector::from_column_slice(if t >= *time { after } else { before }),
            Signal::Piecewise { times, values } => {
                let k = times.iter().rposition(|s| t >= *s).unwrap_or(0);
                Vector::from_column_slice(&values[k])
            }
        }
    }

    /// Times at which the signal jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Signal::Constant { .. } => Vec::new(),
            Signal::Step { time, .. } => vec![*time],
            Signal::Piecewise { times, .. } => times.clone(),
        }
    }
}

/// General plant used by the simulator. Outputs may depend on `t`, `x` and the
/// disturbance `w`, but not on the control input (strictly proper from `u`).
/// Dependence on `t` should be piecewise constant: the integrator holds `t`
/// at the midpoint of each step.
pub trait PlantDynamics: Send + Sync + std::fmt::Debug {
    fn nstates(&self) -> usize;
    fn ninputs(&self) -> usize;
    fn ndisturbances(&self) -> usize;
    fn nmeasured(&self) -> usize;
    fn nconstrained(&self) -> usize;
    fn derivative(&self, t: f64, x: &Vector, u: &Vector, w: &Vector) -> Vector;
    fn measured(&self, t: f64, x: &Vector, w: &Vector) -> Vector;
    fn constrained(&self, t: f64, x: &Vector, w: &Vector) -> Vector;
}

/// LTI plant with inputs `[u; w]` and outputs `[y_m; y_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    pub model: StateSpaceModel,
    pub ninputs: usize,
    pub nmeasured: usize,
}

impl LinearPlant {
    pub fn new(model: StateSpaceModel, ninputs: usize, nmeasured: usize) -> Result<Self, SimError> {
        if ninputs > model.ninputs() || nmeasured > model.noutputs() {
            return Err(SimError::Config("plant partition exceeds model size".into()));
        }
        if (0..model.noutputs()).any(|i| (0..ninputs).any(|j| model.d[(i, j)] != 0.0)) {
            return Err(SimError::Config(
                "plant must be strictly proper from the control input".into(),
            ));
        }
        Ok(Self {
            model,
            ninputs,
            nmeasured,
        })
    }

    /// `x' = A x + B u`, measuring and constraining `C x` (same outputs).
    pub fn measured_and_constrained(model: &StateSpaceModel) -> Result<Self, SimError> {
        let c2 = crate::matrix::block(&[vec![model.c.clone()], vec![model.c.clone()]])
            .map_err(LtiError::from)?;
        let d2 = Matrix::zeros(2 * model.noutputs(), model.ninputs());
        let outputs = model
            .output_labels
            .iter()
            .map(|l| format!("{l}_meas"))
            .chain(model.output_labels.iter().map(|l| format!("{l}_con")))
            .collect();
        let doubled = StateSpaceModel::with_labels(
            model.a.clone(),
            model.b.clone(),
            c2,
            d2,
            model.input_labels.clone(),
            outputs,
        )?;
        Self::new(doubled, model.ninputs(), model.noutputs())
    }
}

impl PlantDynamics for LinearPlant {
    fn nstates(&self) -> usize {
        self.model.nstates()
    }
    fn ninputs(&self) -> usize {
        self.ninputs
    }
    fn ndisturbances(&self) -> usize {
        self.model.ninputs() - self.ninputs
    }
    fn nmeasured(&self) -> usize {
        self.nmeasured
    }
    fn nconstrained(&self) -> usize {
        self.model.noutputs() - self.nmeasured
    }
    fn derivative(&self, _t: f64, x: &Vector, u: &Vector, w: &Vector) -> Vector {
        let bu = self.model.b.columns(0, self.ninputs);
        let bw = self.model.b.columns(self.ninputs, self.ndisturbances());
        &self.model.a * x + bu * u + bw * w
    }
    fn measured(&self, _t: f64, x: &Vector, w: &Vector) -> Vector {
        let c = self.model.c.rows(0, self.nmeasured);
        let dw = self
            .model
            .d
            .view((0, self.ninputs), (self.nmeasured, self.ndisturbances()));
        c * x + dw * w
    }
    fn constrained(&self, _t: f64, x: &Vector, w: &Vector) -> Vector {
        let ns = self.nconstrained();
        let c = self.model.c.rows(self.nmeasured, ns);
        let dw = self
            .model
            .d
            .view((self.nmeasured, self.ninputs), (ns, self.ndisturbances()));
        c * x + dw * w
    }
}

#[derive(Debug, Clone)]
pub enum Plant {
    Linear(LinearPlant),
    Nonlinear(Arc<dyn PlantDynamics>),
}

impl Plant {
    pub fn dynamics(&self) -> &dyn PlantDynamics {
        match self {
            Plant::Linear(p) => p,
            Plant::Nonlinear(p) => p.as_ref(),
        }
    }
}

/// Anti-windup compensator with input `[y_hat - y_s; u_hat - u]` and
/// output `[u_my; u_mu]`. Absent channels have zero width.
#[derive(Debug, Clone, PartialEq)]
pub struct AntiWindup {
    pub model: StateSpaceModel,
    pub n_state_err: usize,
    pub n_input_err: usize,
    pub n_u_my: usize,
    pub n_u_mu: usize,
}

impl AntiWindup {
    /// Compensator driven by the constrained-output error, acting on `u`.
    pub fn state_only(model: StateSpaceModel) -> Self {
        Self {
            n_state_err: model.ninputs(),
            n_input_err: 0,
            n_u_my: model.noutputs(),
            n_u_mu: 0,
            model,
        }
    }

    /// Joint compensator with explicit channel widths.
    pub fn joint(
        model: StateSpaceModel,
        n_state_err: usize,
        n_input_err: usize,
        n_u_my: usize,
        n_u_mu: usize,
    ) -> Result<Self, SimError> {
        if model.ninputs() != n_state_err + n_input_err || model.noutputs() != n_u_my + n_u_mu {
            return Err(SimError::Config("anti-windup channel widths".into()));
        }
        Ok(Self {
            model,
            n_state_err,
            n_input_err,
            n_u_my,
            n_u_mu,
        })
    }
}

/// Whether the plant is driven by the command `u` (soft constraint, only the
/// compensator sees `u_hat - u`) or by the saturated `u_hat` (physical limit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlantInput {
    #[default]
    Command,
    Saturated,
}

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub plant: Plant,
    pub nominal_controller: StateSpaceModel,
    pub anti_windup: Option<AntiWindup>,
    pub state_sat: SaturationSpec,
    pub input_sat: Option<SaturationSpec>,
    pub plant_input: PlantInput,
    pub reference: Signal,
    pub disturbance: Signal,
    pub horizon: f64,
    pub step: f64,
    pub plant_x0: Option<Vec<f64>>,
    pub controller_x0: Option<Vec<f64>>,
    /// Measured channels entering the tracking error integral.
    pub tracking: Vec<usize>,
}

impl LoopConfig {
    /// Configuration with no compensator, disabled saturations, zero
    /// disturbance and all measured channels tracked.
    pub fn new(
        plant: Plant,
        nominal_controller: StateSpaceModel,
        reference: Signal,
        horizon: f64,
        step: f64,
    ) -> Self {
        let dynamics = plant.dynamics();
        let ns = dynamics.nconstrained();
        let nw = dynamics.ndisturbances();
        let nm = dynamics.nmeasured();
        Self {
            plant,
            nominal_controller,
            anti_windup: None,
            state_sat: SaturationSpec::disabled(ns),
            input_sat: None,
            plant_input: PlantInput::Command,
            reference,
            disturbance: Signal::zero(nw),
            horizon,
            step,
            plant_x0: None,
            controller_x0: None,
            tracking: (0..nm).collect(),
        }
    }

    pub fn with_anti_windup(mut self, aw: Option<AntiWindup>) -> Self {
        self.anti_windup = aw;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let p = self.plant.dynamics();
        let k = &self.nominal_controller;
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.horizon > 0.0) || !(self.step > 0.0) || !self.horizon.is_finite() {
            return bad("horizon and step must be positive");
        }
        if k.ninputs() != p.nmeasured() || k.noutputs() != p.ninputs() {
            return bad("nominal controller must map measured outputs to plant inputs");
        }
        if self.state_sat.len() != p.nconstrained() {
            return bad("state saturation width must match the constrained outputs");
        }
        if let Some(s) = &self.input_sat {
            if s.len() != p.ninputs() {
                return bad("input saturation width must match the plant inputs");
            }
        }
        self.reference.validate()?;
        self.disturbance.validate()?;
        if self.reference.dim() != p.nmeasured() {
            return bad("reference width must match the measured outputs");
        }
        if self.disturbance.dim() != p.ndisturbances() {
            return bad("disturbance width must match the plant disturbance inputs");
        }
        if let Some(aw) = &self.anti_windup {
            if aw.n_state_err != 0 && aw.n_state_err != p.nconstrained() {
                return bad("compensator state-error input width");
            }
            if aw.n_input_err != 0 && aw.n_input_err != p.ninputs() {
                return bad("compensator input-error width");
            }
            if aw.n_input_err != 0 && self.input_sat.is_none() {
                return bad("compensator reads u_hat - u but no input saturation is configured");
            }
            if aw.n_u_my != 0 && aw.n_u_my != p.ninputs() {
                return bad("compensator u_my width must match the plant inputs");
            }
            if aw.n_u_mu != 0 && aw.n_u_mu != p.nmeasured() {
                return bad("compensator u_mu width must match the controller inputs");
            }
        }
        if let Some(x0) = &self.plant_x0 {
            if x0.len() != p.nstates() {
                return bad("plant initial state width");
            }
        }
        if let Some(x0) = &self.controller_x0 {
            if x0.len() != k.nstates() {
                return bad("controller initial state width");
            }
        }
        if self.tracking.iter().any(|&i| i >= p.nmeasured()) {
            return bad("tracking channel out of range");
        }
        Ok(())
    }
}

/// Sample-major record of every loop signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub time: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub y_hat: Vec<Vec<f64>>,
    pub y_meas: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub u_c: Vec<Vec<f64>>,
    pub u_my: Vec<Vec<f64>>,
    pub u_mu: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub u_hat: Vec<Vec<f64>>,
    /// Measured channels used for tracking error.
    pub tracking: Vec<usize>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// `y_hat - y` per sample.
    pub fn state_sat_error(&self) -> Vec<Vec<f64>> {
        diff(&self.y_hat, &self.y)
    }

    /// `u_hat - u` per sample.
    pub fn input_sat_error(&self) -> Vec<Vec<f64>> {
        diff(&self.u_hat, &self.u)
    }

    fn columns(&self) -> Vec<(String, &Vec<Vec<f64>>)> {
        vec![
            ("x".to_string(), &self.x),
            ("y".to_string(), &self.y),
            ("y_hat".to_string(), &self.y_hat),
            ("y_meas".to_string(), &self.y_meas),
            ("r".to_string(), &self.r),
            ("u_c".to_string(), &self.u_c),
            ("u_my".to_string(), &self.u_my),
            ("u_mu".to_string(), &self.u_mu),
            ("u".to_string(), &self.u),
            ("u_hat".to_string(), &self.u_hat),
        ]
    }

    /// CSV with one header row and one row per sample.
    pub fn to_csv<W: std::io::Write>(&self, w: W) -> Result<(), SimError> {
        let err = |e: csv::Error| SimError::Export(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let cols = self.columns();
        let sat = self.state_sat_error();
        let isat = self.input_sat_error();
        let mut header = vec!["t".to_string()];
        for (name, series) in &cols {
            let width = series.first().map(|v| v.len()).unwrap_or(0);
            header.extend((0..width).map(|i| format!("{name}{i}")));
        }
        let width = |s: &Vec<Vec<f64>>| s.first().map(|v| v.len()).unwrap_or(0);
        header.extend((0..width(&sat)).map(|i| format!("sat_err{i}")));
        header.extend((0..width(&isat)).map(|i| format!("input_sat_err{i}")));
        out.write_record(&header).map_err(err)?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", self.time[k])];
            for (_, series) in &cols {
                row.extend(series[k].iter().map(|v| format!("{v}")));
            }
            row.extend(sat[k].iter().map(|v| format!("{v}")));
            row.extend(isat[k].iter().map(|v| format!("{v}")));
            out.write_record(&row).map_err(err)?;
        }
        out.flush().map_err(|e| SimError::Export(e.to_string()))?;
        Ok(())
    }
}

fn diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(p, q)| p.iter().zip(q).map(|(x, y)| x - y).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturate_examples() {
        let s = SaturationSpec::symmetric(&[1.0]).unwrap();
        assert_eq!(saturate(&[0.5], &s), vec![0.5]);
        assert_eq!(saturate(&[1.5], &s), vec![1.0]);
        let s = SaturationSpec::upper_only(&[1.0, -0.1]).unwrap();
        assert_eq!(saturate(&[1.3, -0.4], &s), vec![1.0, -0.4]);
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(SaturationSpec::new(vec![1.0], vec![1.0]).is_err());
        assert!(SaturationSpec::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn saturation_json_uses_null_for_unbounded() {
        let s = SaturationSpec::upper_only(&[1.0]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"lower":[null],"upper":[1.0]}"#);
        let back: SaturationSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn signals() {
        let s = Signal::Step {
            time: 1.0,
            before: vec![0.0],
            after: vec![2.0],
        };
        assert_eq!(s.value(0.999)[0], 0.0);
        assert_eq!(s.value(1.0)[0], 2.0);
        let p = Signal::Piecewise {
            times: vec![0.0, 1.0, 2.0],
            values: vec![vec![1.0], vec![2.0], vec![3.0]],
        };
        assert_eq!(p.value(-1.0)[0], 1.0);
        assert_eq!(p.value(1.5)[0], 2.0);
        assert_eq!(p.value(5.0)[0], 3.0);
        assert!(p.validate().is_ok());
    }
}
