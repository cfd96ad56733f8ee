//! Versioned JSON design files shared by the LMI and H-infinity synthesis
//! paths, consumed by the simulator and the command line.

use crate::lmi::{DynamicSantwDesign, StaticSantwDesign};
use crate::lti::{LtiError, StateSpaceModel};
use crate::sim::{AntiWindup, SimError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DESIGN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("unsupported design file version {found} (expected {DESIGN_FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("malformed design file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Compensator given directly as a state-space model with input
/// `[yhat - y; uhat - u]` and output `[u_my; u_mu]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferDesign {
    pub model: StateSpaceModel,
    pub n_state_err: usize,
    pub n_input_err: usize,
    pub n_u_my: usize,
    pub n_u_mu: usize,
    /// Closed-loop H-infinity norm reached by the synthesis, if any.
    pub achieved_norm: Option<f64>,
    pub structure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompensatorDesign {
    StaticSantw(StaticSantwDesign),
    DynamicSantw(DynamicSantwDesign),
    Transfer(TransferDesign),
}

impl CompensatorDesign {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::StaticSantw(_) => "static_santw",
            Self::DynamicSantw(_) => "dynamic_santw",
            Self::Transfer(_) => "transfer",
        }
    }

    /// Simulator view of the compensator.
    pub fn to_anti_windup(&self) -> Result<AntiWindup, DesignError> {
        Ok(match self {
            Self::StaticSantw(d) => AntiWindup::state_only(d.compensator()),
            Self::DynamicSantw(d) => AntiWindup::state_only(d.compensator()),
            Self::Transfer(d) => AntiWindup::joint(
                d.model.clone(),
                d.n_state_err,
                d.n_input_err,
                d.n_u_my,
                d.n_u_mu,
            )?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub version: u32,
    pub design: CompensatorDesign,
}

impl DesignFile {
    pub fn new(design: CompensatorDesign) -> Self {
        Self {
            version: DESIGN_FORMAT_VERSION,
            design,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DesignError> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let found = v.get("version").and_then(|x| x.as_u64()).unwrap_or(0) as u32;
        if found != DESIGN_FORMAT_VERSION {
            return Err(DesignError::Version { found });
        }
        Ok(serde_json::from_value(v)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::from_rows;

    #[test]
    fn transfer_design_round_trips() {
        let model = StateSpaceModel::new(
            from_rows(&[&[-2.0]]),
            from_rows(&[&[1.0, 0.5]]),
            from_rows(&[&[3.0]]),
            from_rows(&[&[0.0, 0.1]]),
        )
        .unwrap();
        let f = DesignFile::new(CompensatorDesign::Transfer(TransferDesign {
            model,
            n_state_err: 1,
            n_input_err: 1,
            n_u_my: 1,
            n_u_mu: 0,
            achieved_norm: Some(1.5),
            structure: "full".into(),
        }));
        let back = DesignFile::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
        let aw = back.design.to_anti_windup().unwrap();
        assert_eq!((aw.n_state_err, aw.n_input_err), (1, 1));
    }

    #[test]
    fn wrong_version_rejected() {
        let s = r#"{"version": 99, "design": {"kind": "transfer"}}"#;
        assert!(matches!(
            DesignFile::from_json(s),
            Err(DesignError::Version { found: 99 })
        ));
    }
}
