//! JSON scenario files.

use antiwindup::sim::{PlantInput, SaturationSpec};
use antiwindup::synth::SynthOptions;
use antiwindup::vsc::VscStudy;
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub plant: PlantSpec,
    /// Required for every plant except the converter, which brings its own.
    #[serde(default)]
    pub controller: Option<ControllerSpec>,
    pub method: Method,
    #[serde(default)]
    pub saturation: Option<SaturationSection>,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
    #[serde(default)]
    pub export: ExportOptions,
    #[serde(default)]
    pub seed: u64,
    /// Wall-clock budget for a release build, in seconds.
    #[serde(default)]
    pub time_budget_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// `1 / (s^2 + s + 1)` with both states measured and constrained.
    Example1,
    /// `x' = A x + B u` with every state measured and constrained.
    StateSpace { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    /// Grid-connected converter with a resistive fault.
    Vsc {
        #[serde(default)]
        study: Option<VscStudy>,
        fault: FaultSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub resistance: f64,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// `u = kd e1 + kp e2 + ki int(e2)` on `e = r - x` of a two-state plant.
    Pid { kp: f64, ki: f64, kd: f64 },
    StateSpace {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weight {
    Static { gain: f64 },
    /// `(s + zero) / (s + pole)`.
    LeadLag { zero: f64, pole: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_evaluations")]
    pub max_evaluations: usize,
}

fn default_starts() -> usize {
    SynthOptions::default().starts
}

fn default_evaluations() -> usize {
    SynthOptions::default().max_evaluations
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            starts: default_starts(),
            max_evaluations: default_evaluations(),
        }
    }
}

impl SynthSection {
    pub fn options(&self, seed: u64) -> SynthOptions {
        SynthOptions {
            seed,
            starts: self.starts,
            max_evaluations: self.max_evaluations,
            ..SynthOptions::default()
        }
    }
}

fn default_rate_bound() -> Option<f64> {
    Some(20.0)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Method {
    /// State compensator from the weighted mixed-sensitivity problem, one
    /// order per state-error input.
    FreqOantw {
        w1: Weight,
        w2: Weight,
        orders: Vec<usize>,
        #[serde(default)]
        synthesis: SynthSection,
    },
    StaticLmi { alpha: f64, beta: f64, gamma_uc: f64 },
    DynamicLmi {
        alpha: f64,
        beta: f64,
        gamma_uc: f64,
        #[serde(default = "default_rate_bound")]
        rate_bound: Option<f64>,
    },
    /// Diagonal joint input-state compensator of the given order per block.
    FixedStructure {
        wu: Weight,
        wy: Weight,
        order: usize,
        #[serde(default)]
        synthesis: SynthSection,
    },
    /// Full joint compensator, optionally warm-started from the diagonal
    /// optimum of the same order.
    FullMatrix {
        wu: Weight,
        wy: Weight,
        order: usize,
        #[serde(default)]
        synthesis: SynthSection,
        #[serde(default = "default_true")]
        warm_start: bool,
    },
    None,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FreqOantw { .. } => "freq-oantw",
            Self::StaticLmi { .. } => "static-lmi",
            Self::DynamicLmi { .. } => "dynamic-lmi",
            Self::FixedStructure { .. } => "fixed-structure",
            Self::FullMatrix { .. } => "full-matrix",
            Self::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSection {
    pub state: SaturationSpec,
    #[serde(default)]
    pub input: Option<SaturationSpec>,
    #[serde(default)]
    pub plant_input: PlantInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: f64,
    pub step: f64,
    /// Constant reference on the measured channels.
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportOptions {
    #[serde(default = "default_true")]
    pub traces: bool,
    #[serde(default = "default_true")]
    pub plots: bool,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self {
            traces: true,
            plots: true,
        }
    }
}

impl ScenarioFile {
    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s).context("scenario is not valid JSON")?;
        match v.get("schema_version").and_then(|x| x.as_u64()) {
            Some(n) if n == SCENARIO_SCHEMA_VERSION as u64 => {}
            Some(n) => bail!("unsupported schema_version {n} (expected {SCENARIO_SCHEMA_VERSION})"),
            None => bail!("missing field `schema_version`"),
        }
        let f: Self = serde_json::from_value(v).context("invalid scenario")?;
        f.validate()?;
        Ok(f)
    }

    /// Method and plant fields that serde cannot check on its own.
    pub fn validate(&self) -> Result<()> {
        let vsc = matches!(self.plant, PlantSpec::Vsc { .. });
        if vsc {
            let ok = matches!(self.method, Method::FixedStructure { .. } | Method::None);
            if !ok {
                bail!("method `{}` is not available for the converter plant", self.method.name());
            }
            return Ok(());
        }
        if self.controller.is_none() {
            bail!("missing field `controller`");
        }
        if self.saturation.is_none() {
            bail!("missing field `saturation`");
        }
        if self.simulation.is_none() {
            bail!("missing field `simulation`");
        }
        if let Method::FixedStructure { order, .. } | Method::FullMatrix { order, .. } = self.method {
            if self.saturation.as_ref().and_then(|s| s.input.as_ref()).is_none() {
                bail!("method `{}` needs field `saturation.input`", self.method.name());
            }
            if order > 12 {
                bail!("order {order} is above the supported maximum of 12");
            }
        }
        Ok(())
    }

    pub fn saturation(&self) -> Result<&SaturationSection> {
        self.saturation.as_ref().ok_or_else(|| anyhow!("missing field `saturation`"))
    }

    pub fn simulation(&self) -> Result<&SimulationSection> {
        self.simulation.as_ref().ok_or_else(|| anyhow!("missing field `simulation`"))
    }
}

/// Scenarios shipped with the binary, by id.
pub const BUNDLED: &[(&str, &str)] = &[
    ("example1a", include_str!("../scenarios/example1a.json")),
    ("example1a_const", include_str!("../scenarios/example1a_const.json")),
    ("nominal", include_str!("../scenarios/nominal.json")),
    ("static_lmi", include_str!("../scenarios/static_lmi.json")),
    ("dynamic_lmi", include_str!("../scenarios/dynamic_lmi.json")),
    ("example1d_fixed", include_str!("../scenarios/example1d_fixed.json")),
    ("full_matrix", include_str!("../scenarios/full_matrix.json")),
    ("vsc", include_str!("../scenarios/vsc.json")),
];

pub fn bundled(id: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(k, _)| *k == id).map(|(_, v)| *v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_with_matching_ids() {
        for (id, text) in BUNDLED {
            let s = ScenarioFile::from_json(text).unwrap_or_else(|e| panic!("{id}: {e:#}"));
            assert_eq!(&s.id, id);
        }
    }

    #[test]
    fn missing_plant_is_named() {
        let s = r#"{"schema_version": 1, "id": "x", "method": {"kind": "none"}}"#;
        let e = format!("{:#}", ScenarioFile::from_json(s).unwrap_err());
        assert!(e.contains("plant"), "{e}");
    }

    #[test]
    fn missing_controller_is_named() {
        let s = r#"{"schema_version": 1, "id": "x", "plant": {"kind": "example1"}, "method": {"kind": "none"}}"#;
        let e = format!("{:#}", ScenarioFile::from_json(s).unwrap_err());
        assert!(e.contains("controller"), "{e}");
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let s = r#"{"schema_version": 7, "id": "x"}"#;
        assert!(ScenarioFile::from_json(s).is_err());
    }

    #[test]
    fn seed_defaults_to_zero() {
        let s: ScenarioFile = serde_json::from_str(bundled("nominal").unwrap()).unwrap();
        assert_eq!(s.seed, 0);
    }
}
