//! Second-order benchmark: `G(s) = 1 / (s^2 + s + 1)` with both states
//! measured and constrained, and its nominal controllers and weights.

use crate::lmi::SantwWeights;
use crate::lti::{RationalTransfer, StateSpaceModel};
use crate::matrix::{from_rows, Matrix};
use crate::sim::{LinearPlant, LoopConfig, Plant, PlantInput, SaturationSpec, Signal};
use crate::synth::{build_isantw_plant, CompensatorStructure, GeneralizedPlant};

/// PID gains tuned for an oscillatory step response (roughly 40% overshoot).
pub const PID_GAINS: PidGains = PidGains {
    kp: 4.2,
    ki: 4.0,
    kd: 1.2,
};

/// MIMO-PI gains placing the nominal poles at `-0.4 +- 1.6j` and `-1.2`.
pub const MIMO_PI_GAINS: PidGains = PidGains {
    kp: 2.68,
    ki: 3.264,
    kd: 1.0,
};

/// Static-gain weights (`alpha`, `beta`, `gamma_uc`).
pub const STATIC_SANTW_WEIGHTS: SantwWeights = SantwWeights {
    alpha: 0.001,
    beta: 3.15,
    gamma_uc: 5.0,
};

/// Reference gain for the static design under [`STATIC_SANTW_WEIGHTS`];
/// LMI solutions are not unique, so this is informational.
pub const REFERENCE_STATIC_GAIN: [f64; 2] = [1.3057, 0.9549];

/// Symmetric limit on the control input for the joint input-state problem;
/// the nominal loop commands 4.2 at the reference step.
pub const ISANTW_INPUT_BOUND: f64 = 3.0;

pub const SIM_STEP: f64 = 1e-3;
pub const SIM_HORIZON: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

/// `x1` is the velocity, `x2 = y`.
pub fn plant_matrices() -> (Matrix, Matrix) {
    (
        from_rows(&[&[-1.0, -1.0], &[1.0, 0.0]]),
        from_rows(&[&[1.0], &[0.0]]),
    )
}

pub fn plant() -> StateSpaceModel {
    let (a, b) = plant_matrices();
    StateSpaceModel::with_labels(
        a,
        b,
        Matrix::identity(2, 2),
        Matrix::zeros(2, 1),
        vec!["u".into()],
        vec!["x1".into(), "x2".into()],
    )
    .expect("benchmark plant dimensions")
}

/// Controller on `e = r - x` with `r = [0; 1]`:
/// `u = kd e1 + kp e2 + ki int(e2)`, i.e. derivative action through the velocity.
pub fn controller(g: PidGains) -> StateSpaceModel {
    StateSpaceModel::with_labels(
        from_rows(&[&[0.0]]),
        from_rows(&[&[0.0, 1.0]]),
        from_rows(&[&[g.ki]]),
        from_rows(&[&[g.kd, g.kp]]),
        vec!["e1".into(), "e2".into()],
        vec!["u_c".into()],
    )
    .expect("controller dimensions")
}

pub fn reference() -> Signal {
    Signal::Constant {
        value: vec![0.0, 1.0],
    }
}

/// Upper bound 1 on both states.
pub fn upper_bounds() -> SaturationSpec {
    SaturationSpec::upper_only(&[1.0, 1.0]).expect("valid bounds")
}

/// Bounds `[-0.1, 1]` on both states.
pub fn two_sided_bounds() -> SaturationSpec {
    SaturationSpec::new(vec![-0.1, -0.1], vec![1.0, 1.0]).expect("valid bounds")
}

pub fn loop_config(controller: StateSpaceModel, state_sat: SaturationSpec) -> LoopConfig {
    let plant = LinearPlant::measured_and_constrained(&plant()).expect("strictly proper plant");
    let mut cfg = LoopConfig::new(
        Plant::Linear(plant),
        controller,
        reference(),
        SIM_HORIZON,
        SIM_STEP,
    );
    cfg.state_sat = state_sat;
    cfg
}

/// First-order weight `(s + z) / (s + p)`, one copy per channel.
pub fn lead_lag_weight(z: f64, p: f64, channels: usize) -> StateSpaceModel {
    let one = RationalTransfer::siso(&[1.0, z], &[1.0, p])
        .and_then(|t| t.to_state_space())
        .expect("proper first-order weight");
    StateSpaceModel::append(&vec![&one; channels])
}

/// Frequency-shaped state weight for the H-infinity state compensator.
pub fn shaped_state_weight(channels: usize) -> StateSpaceModel {
    lead_lag_weight(155.5, 15.24, channels)
}

/// Weight used on both saturation errors of the joint input-state problem.
pub fn joint_weight(channels: usize) -> StateSpaceModel {
    lead_lag_weight(231.9, 22.74, channels)
}

/// Joint input-state generalized plant around the PID loop.
pub fn isantw_plant() -> GeneralizedPlant {
    build_isantw_plant(&plant(), &controller(PID_GAINS), &joint_weight(1), &joint_weight(2))
        .expect("benchmark joint plant")
}

/// `diag(G_my, G_mu)`: both state errors drive `u_my`, the input error
/// drives the two controller-input corrections.
pub fn isantw_diagonal(order: usize) -> CompensatorStructure {
    CompensatorStructure::block_diagonal(&[(2, 1), (1, 2)], &[order, order])
}

/// PID loop with upper state bounds and a physical input limit.
pub fn isantw_loop_config() -> LoopConfig {
    let mut cfg = loop_config(controller(PID_GAINS), upper_bounds());
    cfg.input_sat = Some(SaturationSpec::symmetric(&[ISANTW_INPUT_BOUND]).expect("valid bound"));
    cfg.plant_input = PlantInput::Saturated;
    cfg
}

pub fn static_weight(k: f64, channels: usize) -> StateSpaceModel {
    StateSpaceModel::static_gain(Matrix::identity(channels, channels) * k)
}
