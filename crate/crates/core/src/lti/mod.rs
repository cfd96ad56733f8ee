//! Continuous-time LTI models: state-space realizations, rational transfer
//! matrices, block interconnection, frequency response and H-infinity norms.

mod connect;
mod norm;
mod reduce;
mod transfer;

pub use connect::{
    anti_windup_sensitivity, feedback, lft_lower, parallel, series, Network, PartId, Source,
};
pub use norm::{
    frequency_response, frequency_sweep_max, hinf_norm, is_hurwitz, log_grid, FrequencyEvaluator,
    HinfNorm, HINF_DEFAULT_TOL, HURWITZ_TOL,
};
pub use reduce::{balanced_truncation, lyapunov, reduce_if_large, REDUCTION_STATE_THRESHOLD};
pub use transfer::{Polynomial, RationalTransfer};

use crate::matrix::{block_diag, LinalgError, Matrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model contains non-finite entries")]
    NonFinite,
    #[error("transfer entry ({row},{col}) is improper (numerator degree exceeds denominator)")]
    Improper { row: usize, col: usize },
    #[error("invalid polynomial: {0}")]
    Polynomial(String),
    #[error("ill-posed algebraic loop through parts [{}]", parts.join(", "))]
    IllPosed { parts: Vec<String> },
    #[error("frequency {omega} rad/s lies on a pole of the model")]
    Resonance { omega: f64 },
    #[error("unknown channel: {0}")]
    UnknownChannel(String),
    #[error("model is not asymptotically stable")]
    Unstable,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("serialization: {0}")]
    Json(String),
}

/// `x' = A x + B u`, `y = C x + D u` with named channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl StateSpaceModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self, LtiError> {
        let m = d.ncols();
        let p = d.nrows();
        Self::with_labels(a, b, c, d, default_labels("u", m), default_labels("y", p))
    }

    pub fn with_labels(
        a: Matrix,
        b: Matrix,
        c: Matrix,
        d: Matrix,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self, LtiError> {
        let n = a.nrows();
        let (p, m) = (d.nrows(), d.ncols());
        let shapes = [
            ("A", a.shape(), (n, n)),
            ("B", b.shape(), (n, m)),
            ("C", c.shape(), (p, n)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(LtiError::Dimension(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        if input_labels.len() != m || output_labels.len() != p {
            return Err(LtiError::Dimension(format!(
                "{} input / {} output labels for a {p}x{m} model",
                input_labels.len(),
                output_labels.len()
            )));
        }
        if [&a, &b, &c, &d]
            .iter()
            .any(|mat| mat.iter().any(|v| !v.is_finite()))
        {
            return Err(LtiError::NonFinite);
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            input_labels,
            output_labels,
        })
    }

    /// Memoryless model `y = D u`.
    pub fn static_gain(d: Matrix) -> Self {
        let (p, m) = d.shape();
        Self::new(Matrix::zeros(0, 0), Matrix::zeros(0, m), Matrix::zeros(p, 0), d)
            .expect("static gain dimensions are consistent by construction")
    }

    pub fn identity(n: usize) -> Self {
        Self::static_gain(Matrix::identity(n, n))
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::static_gain(Matrix::zeros(outputs, inputs))
    }

    pub fn nstates(&self) -> usize {
        self.a.nrows()
    }

    pub fn ninputs(&self) -> usize {
        self.d.ncols()
    }

    pub fn noutputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn relabel(mut self, inputs: &[&str], outputs: &[&str]) -> Result<Self, LtiError> {
        if inputs.len() != self.ninputs() || outputs.len() != self.noutputs() {
            return Err(LtiError::Dimension("label count mismatch".into()));
        }
        self.input_labels = inputs.iter().map(|s| s.to_string()).collect();
        self.output_labels = outputs.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    /// Output scaling `k * G`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut s = self.clone();
        s.c *= k;
        s.d *= k;
        s
    }

    /// Output-side matrix multiplication `L * G`.
    pub fn left_mul(&self, l: &Matrix) -> Result<Self, LtiError> {
        if l.ncols() != self.noutputs() {
            return Err(LtiError::Dimension("left multiplier width".into()));
        }
        Self::new(self.a.clone(), self.b.clone(), l * &self.c, l * &self.d)
    }

    /// Input-side matrix multiplication `G * R`.
    pub fn right_mul(&self, r: &Matrix) -> Result<Self, LtiError> {
        if r.nrows() != self.ninputs() {
            return Err(LtiError::Dimension("right multiplier height".into()));
        }
        Self::new(self.a.clone(), &self.b * r, self.c.clone(), &self.d * r)
    }

    /// Sub-model keeping the listed output rows and input columns.
    pub fn select(&self, outputs: &[usize], inputs: &[usize]) -> Result<Self, LtiError> {
        if outputs.iter().any(|&i| i >= self.noutputs()) || inputs.iter().any(|&j| j >= self.ninputs())
        {
            return Err(LtiError::UnknownChannel("select index out of range".into()));
        }
        let n = self.nstates();
        let b = Matrix::from_fn(n, inputs.len(), |i, j| self.b[(i, inputs[j])]);
        let c = Matrix::from_fn(outputs.len(), n, |i, j| self.c[(outputs[i], j)]);
        let d = Matrix::from_fn(outputs.len(), inputs.len(), |i, j| {
            self.d[(outputs[i], inputs[j])]
        });
        Self::with_labels(
            self.a.clone(),
            b,
            c,
            d,
            inputs.iter().map(|&j| self.input_labels[j].clone()).collect(),
            outputs.iter().map(|&i| self.output_labels[i].clone()).collect(),
        )
    }

    /// Block-diagonal union of independent models (inputs and outputs stacked).
    pub fn append(models: &[&StateSpaceModel]) -> Self {
        let a = block_diag(&models.iter().map(|m| &m.a).collect::<Vec<_>>());
        let b = block_diag(&models.iter().map(|m| &m.b).collect::<Vec<_>>());
        let c = block_diag(&models.iter().map(|m| &m.c).collect::<Vec<_>>());
        let d = block_diag(&models.iter().map(|m| &m.d).collect::<Vec<_>>());
        let inputs = models.iter().flat_map(|m| m.input_labels.clone()).collect();
        let outputs = models.iter().flat_map(|m| m.output_labels.clone()).collect();
        Self::with_labels(a, b, c, d, inputs, outputs)
            .expect("block-diagonal union of valid models is valid")
    }

    /// State-coordinate change `x = T z`.
    pub fn similarity(&self, t: &Matrix, t_inv: &Matrix) -> Result<Self, LtiError> {
        Self::with_labels(
            t_inv * &self.a * t,
            t_inv * &self.b,
            &self.c * t,
            self.d.clone(),
            self.input_labels.clone(),
            self.output_labels.clone(),
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ModelDoc::from(self)).expect("model serialization is infallible")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, LtiError> {
        let doc: ModelDoc =
            serde_json::from_value(v.clone()).map_err(|e| LtiError::Json(e.to_string()))?;
        doc.try_into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

/// JSON layout of a state-space model. Dimensions are recovered from the
/// label counts and the state count, so empty blocks round-trip exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    pub labels: Labels,
}

impl From<&StateSpaceModel> for ModelDoc {
    fn from(s: &StateSpaceModel) -> Self {
        use crate::matrix::to_rows;
        ModelDoc {
            a: to_rows(&s.a),
            b: to_rows(&s.b),
            c: to_rows(&s.c),
            d: to_rows(&s.d),
            labels: Labels {
                inputs: s.input_labels.clone(),
                outputs: s.output_labels.clone(),
            },
        }
    }
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>], r: usize, c: usize) -> Result<Matrix, LtiError> {
    if r == 0 || c == 0 {
        return Ok(Matrix::zeros(r, c));
    }
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(LtiError::Json(format!("{name} must be {r}x{c}")));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl TryFrom<ModelDoc> for StateSpaceModel {
    type Error = LtiError;

    fn try_from(doc: ModelDoc) -> Result<Self, LtiError> {
        let n = doc.a.len();
        let m = doc.labels.inputs.len();
        let p = doc.labels.outputs.len();
        StateSpaceModel::with_labels(
            rows_to_matrix("A", &doc.a, n, n)?,
            rows_to_matrix("B", &doc.b, n, m)?,
            rows_to_matrix("C", &doc.c, p, n)?,
            rows_to_matrix("D", &doc.d, p, m)?,
            doc.labels.inputs,
            doc.labels.outputs,
        )
    }
}

impl Serialize for StateSpaceModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpaceModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        ModelDoc::deserialize(d)?
            .try_into()
            .map_err(|e: LtiError| serde::de::Error::custom(e.to_string()))
    }
}
