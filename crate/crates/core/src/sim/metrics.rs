//! Scalar summaries of a trace and the dissipation-inequality check.

use super::{SimError, SimulationTrace};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Integral of `||y_hat - y||^2`.
    pub saturation_error_energy: f64,
    /// Integral of `||u_hat - u||^2`.
    pub input_saturation_error_energy: f64,
    /// Integral of `||u_my||^2` (the state compensator action).
    pub compensation_energy: f64,
    /// Integral of `||u_mu||^2` (the input compensator action).
    pub conditioning_energy: f64,
    /// Largest `|u_i|` over all samples and channels.
    pub peak_abs_input: f64,
    /// Largest `|y_hat_i - y_i|` per constrained channel.
    pub peak_violation: Vec<f64>,
    /// Integral of `||r - y_meas||^2` over the tracked channels.
    pub tracking_ise: f64,
}

fn trapezoid(time: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    time.windows(2)
        .enumerate()
        .map(|(k, w)| 0.5 * (w[1] - w[0]) * (f(k) + f(k + 1)))
        .sum()
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn metrics(t: &SimulationTrace) -> MetricsReport {
    let sat = t.state_sat_error();
    let isat = t.input_sat_error();
    let width = sat.first().map(|v| v.len()).unwrap_or(0);
    let mut peak_violation = vec![0.0f64; width];
    for row in &sat {
        for (p, v) in peak_violation.iter_mut().zip(row) {
            *p = p.max(v.abs());
        }
    }
    let tracking_err = |k: usize| {
        t.tracking
            .iter()
            .map(|&i| (t.r[k][i] - t.y_meas[k][i]).powi(2))
            .sum::<f64>()
    };
    MetricsReport {
        saturation_error_energy: trapezoid(&t.time, |k| sq(&sat[k])),
        input_saturation_error_energy: trapezoid(&t.time, |k| sq(&isat[k])),
        compensation_energy: trapezoid(&t.time, |k| sq(&t.u_my[k])),
        conditioning_energy: trapezoid(&t.time, |k| sq(&t.u_mu[k])),
        peak_abs_input: t
            .u
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, v| m.max(v.abs())),
        peak_violation,
        tracking_ise: trapezoid(&t.time, tracking_err),
    }
}

impl MetricsReport {
    pub fn to_json_string(&self) -> Result<String, SimError> {
        serde_json::to_string_pretty(self).map_err(|e| SimError::Export(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    /// Largest `Delta(t)` over interior samples.
    pub max_residual: f64,
    /// Largest `Delta(t)` divided by the sum of magnitudes of its terms.
    pub max_scaled_residual: f64,
    /// Time of the largest scaled residual.
    pub worst_time: f64,
}

/// Evaluates along the trace
/// `Delta = d/dt(x'Px) + alpha |u_m|^2 + beta |x_hat - x|^2
///          - gamma_xhat |x_hat|^2 - gamma_uc |u_c|^2`,
/// with `x` the recorded plant state, `x_hat` the saturated constrained
/// output, `u_m` the state compensator output and `u_c` the nominal command.
/// The derivative of `V` uses central differences on the sample grid.
pub fn dissipation_check(
    t: &SimulationTrace,
    p: &Matrix,
    alpha: f64,
    beta: f64,
    gamma_xhat: f64,
    gamma_uc: f64,
) -> DissipationReport {
    let v = |k: usize| {
        let x = nalgebra::DVector::from_column_slice(&t.x[k]);
        (x.transpose() * p * &x)[(0, 0)]
    };
    let mut report = DissipationReport {
        max_residual: 0.0,
        max_scaled_residual: 0.0,
        worst_time: 0.0,
    };
    let n = t.len();
    if n < 3 {
        return report;
    }
    let mut first = true;
    for k in 1..n - 1 {
        let dv = (v(k + 1) - v(k - 1)) / (t.time[k + 1] - t.time[k - 1]);
        let err: Vec<f64> = t.y_hat[k].iter().zip(&t.x[k]).map(|(a, b)| a - b).collect();
        let terms = [
            dv,
            alpha * sq(&t.u_my[k]),
            beta * sq(&err),
            -gamma_xhat * sq(&t.y_hat[k]),
            -gamma_uc * sq(&t.u_c[k]),
        ];
        let delta: f64 = terms.iter().sum();
        let magnitude: f64 = terms.iter().map(|x| x.abs()).sum();
        let scaled = if magnitude > 0.0 { delta / magnitude } else { 0.0 };
        if first || delta > report.max_residual {
            report.max_residual = delta;
        }
        if first || scaled > report.max_scaled_residual {
            report.max_scaled_residual = scaled;
            report.worst_time = t.time[k];
        }
        first = false;
    }
    report
}
