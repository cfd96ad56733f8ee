//! Scenario execution: synthesize, simulate the nominal and compensated
//! loops, and write the artifacts.

use crate::plot::{LinePlot, Series};
use crate::scenario::{ControllerSpec, Method, PlantSpec, ScenarioFile, SynthSection, Weight};
use antiwindup::cases::{controller, lead_lag_weight, plant, static_weight, PidGains};
use antiwindup::design::{CompensatorDesign, DesignFile};
use antiwindup::lmi::{
    algorithm1_dynamic, algorithm1_static, Algorithm1Options, DynamicOptions, SantwWeights,
};
use antiwindup::lti::StateSpaceModel;
use antiwindup::matrix::{from_rows, Matrix};
use antiwindup::sim::{
    metrics, simulate, LinearPlant, LoopConfig, MetricsReport, Plant, Signal, SimulationTrace,
};
use antiwindup::synth::{
    build_isantw_plant, build_oantw_plant, synth_fixed_structure, synth_full_matrix,
    CompensatorStructure, SynthesisResult,
};
use antiwindup::vsc::{
    design_vsc_antiwindup, run_fault_study, FaultScenario, VscDesignOptions, VscMetrics, VscStudy,
};
use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub kind: String,
    /// Closed-loop H-infinity norm of the synthesis, for the optimization methods.
    pub achieved_norm: Option<f64>,
    /// Same norm with a zero compensator; `None` when unstable or not computed.
    pub zero_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverterMetrics {
    pub nominal: VscMetrics,
    pub compensated: VscMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub schema_version: u32,
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    pub design: DesignSummary,
    pub nominal: MetricsReport,
    pub compensated: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converter: Option<ConverterMetrics>,
}

struct Outcome {
    design: Option<CompensatorDesign>,
    summary: DesignSummary,
    nominal: SimulationTrace,
    compensated: SimulationTrace,
    converter: Option<ConverterMetrics>,
}

fn rows(name: &str, r: &[Vec<f64>]) -> Result<Matrix> {
    ensure!(!r.is_empty(), "`{name}` has no rows");
    let width = r[0].len();
    ensure!(r.iter().all(|row| row.len() == width), "`{name}` rows differ in length");
    let refs: Vec<&[f64]> = r.iter().map(|v| v.as_slice()).collect();
    Ok(from_rows(&refs))
}

fn weight(w: Weight, channels: usize) -> StateSpaceModel {
    match w {
        Weight::Static { gain } => static_weight(gain, channels),
        Weight::LeadLag { zero, pole } => lead_lag_weight(zero, pole, channels),
    }
}

fn plant_model(spec: &PlantSpec) -> Result<StateSpaceModel> {
    Ok(match spec {
        PlantSpec::Example1 => plant(),
        PlantSpec::StateSpace { a, b } => {
            let (a, b) = (rows("plant.a", a)?, rows("plant.b", b)?);
            let n = a.nrows();
            StateSpaceModel::new(a, b.clone(), Matrix::identity(n, n), Matrix::zeros(n, b.ncols()))?
        }
        PlantSpec::Vsc { .. } => bail!("converter plant has no linear model here"),
    })
}

fn controller_model(spec: &ControllerSpec) -> Result<StateSpaceModel> {
    Ok(match spec {
        ControllerSpec::Pid { kp, ki, kd } => controller(PidGains {
            kp: *kp,
            ki: *ki,
            kd: *kd,
        }),
        ControllerSpec::StateSpace { a, b, c, d } => {
            let d = rows("controller.d", d)?;
            let n = a.len();
            let a = if n == 0 { Matrix::zeros(0, 0) } else { rows("controller.a", a)? };
            let b = if n == 0 { Matrix::zeros(0, d.ncols()) } else { rows("controller.b", b)? };
            let c = if n == 0 { Matrix::zeros(d.nrows(), 0) } else { rows("controller.c", c)? };
            StateSpaceModel::new(a, b, c, d)?
        }
    })
}

fn summary_of(kind: &str, r: Option<&SynthesisResult>) -> DesignSummary {
    DesignSummary {
        kind: kind.into(),
        achieved_norm: r.map(|r| r.achieved_norm),
        zero_norm: r.and_then(|r| r.zero_norm),
    }
}

fn run_linear(s: &ScenarioFile, seed: u64) -> Result<Outcome> {
    let g = plant_model(&s.plant)?;
    let k = controller_model(s.controller.as_ref().context("missing field `controller`")?)?;
    let sat = s.saturation()?;
    let sim = s.simulation()?;
    let lin = LinearPlant::measured_and_constrained(&g)?;
    let mut cfg = LoopConfig::new(
        Plant::Linear(lin),
        k.clone(),
        Signal::Constant {
            value: sim.reference.clone(),
        },
        sim.horizon,
        sim.step,
    );
    cfg.state_sat = sat.state.clone();
    cfg.input_sat = sat.input.clone();
    cfg.plant_input = sat.plant_input;
    cfg.validate().context("invalid loop configuration")?;

    let (n_y, n_u, n_k) = (g.noutputs(), g.ninputs(), k.ninputs());
    let lmi_opts = Algorithm1Options {
        seed,
        ..Algorithm1Options::default()
    };
    let isantw = |wu: Weight, wy: Weight, order: usize, syn: &SynthSection| -> Result<_> {
        let p = build_isantw_plant(&g, &k, &weight(wu, n_u), &weight(wy, n_y))?;
        let st = CompensatorStructure::block_diagonal(&[(n_y, n_u), (n_u, n_k)], &[order, order]);
        let r = synth_fixed_structure(&p, &st, &syn.options(seed))?;
        Ok((p, st, r))
    };
    let (design, summary) = match &s.method {
        Method::None => (None, summary_of("none", None)),
        Method::FreqOantw {
            w1,
            w2,
            orders,
            synthesis,
        } => {
            ensure!(
                orders.len() == n_y,
                "method.orders needs one entry per state error ({n_y}), got {}",
                orders.len()
            );
            let p = build_oantw_plant(&g, &weight(*w1, n_y), &weight(*w2, n_u))?;
            let st = CompensatorStructure::full(n_y, n_u, orders.clone());
            let r = synth_fixed_structure(&p, &st, &synthesis.options(seed))?;
            let d = CompensatorDesign::Transfer(r.to_transfer_design(n_y, n_u));
            (Some(d), summary_of("transfer", Some(&r)))
        }
        Method::StaticLmi {
            alpha,
            beta,
            gamma_uc,
        } => {
            let w = SantwWeights::new(*alpha, *beta, *gamma_uc)?;
            let d = algorithm1_static(&g.a, &g.b, &w, &lmi_opts)?;
            (Some(CompensatorDesign::StaticSantw(d)), summary_of("static_santw", None))
        }
        Method::DynamicLmi {
            alpha,
            beta,
            gamma_uc,
            rate_bound,
        } => {
            let w = SantwWeights::new(*alpha, *beta, *gamma_uc)?;
            let dyn_opts = DynamicOptions {
                rate_bound: *rate_bound,
                ..DynamicOptions::default()
            };
            let d = algorithm1_dynamic(&g.a, &g.b, &w, &dyn_opts, &lmi_opts)?;
            (Some(CompensatorDesign::DynamicSantw(d)), summary_of("dynamic_santw", None))
        }
        Method::FixedStructure {
            wu,
            wy,
            order,
            synthesis,
        } => {
            let (_, _, r) = isantw(*wu, *wy, *order, synthesis)?;
            let d = CompensatorDesign::Transfer(r.to_transfer_design(n_y, n_u));
            (Some(d), summary_of("transfer", Some(&r)))
        }
        Method::FullMatrix {
            wu,
            wy,
            order,
            synthesis,
            warm_start,
        } => {
            let (p, st, diag) = isantw(*wu, *wy, *order, synthesis)?;
            let warm = warm_start.then_some(&diag);
            let r = synth_full_matrix(&p, &st.orders, &synthesis.options(seed), warm)?;
            let d = CompensatorDesign::Transfer(r.to_transfer_design(n_y, n_u));
            (Some(d), summary_of("transfer", Some(&r)))
        }
    };
    let nominal = simulate(&cfg).context("nominal simulation failed")?;
    let compensated = match &design {
        Some(d) => simulate(&cfg.clone().with_anti_windup(Some(d.to_anti_windup()?)))
            .context("compensated simulation failed")?,
        None => nominal.clone(),
    };
    Ok(Outcome {
        design,
        summary,
        nominal,
        compensated,
        converter: None,
    })
}

fn run_vsc(s: &ScenarioFile, study: &VscStudy, fault: &FaultScenario, seed: u64) -> Result<Outcome> {
    let (design, summary) = match &s.method {
        Method::None => (None, summary_of("none", None)),
        Method::FixedStructure {
            wu,
            wy,
            order,
            synthesis,
        } => {
            let (zero, pole) = match (wu, wy) {
                (Weight::LeadLag { zero, pole }, w) if w == wu => (*zero, *pole),
                _ => bail!("the converter design needs equal lead-lag weights `wu` and `wy`"),
            };
            let opts = VscDesignOptions {
                weight_zero: zero,
                weight_pole: pole,
                order: *order,
                synth: synthesis.options(seed),
            };
            let (t, r) = design_vsc_antiwindup(study, &opts)?;
            (Some(CompensatorDesign::Transfer(t)), summary_of("transfer", Some(&r)))
        }
        m => bail!("method `{}` is not available for the converter plant", m.name()),
    };
    let (nominal, m_nom) = run_fault_study(fault, study, None)?;
    let (compensated, m_comp) = match &design {
        Some(d) => run_fault_study(fault, study, Some(d))?,
        None => (nominal.clone(), m_nom.clone()),
    };
    Ok(Outcome {
        design,
        summary,
        nominal,
        compensated,
        converter: Some(ConverterMetrics {
            nominal: m_nom,
            compensated: m_comp,
        }),
    })
}

fn column(v: &[Vec<f64>], i: usize) -> Vec<f64> {
    v.iter().map(|r| r[i]).collect()
}

fn plots(nom: &SimulationTrace, comp: &SimulationTrace) -> Vec<(String, LinePlot)> {
    let base = |title: String, y_label: String, series: Vec<Series>| LinePlot {
        title,
        x_label: "time (s)".into(),
        y_label,
        x: nom.time.clone(),
        series,
    };
    let mut out = Vec::new();
    let (en, ec) = (nom.state_sat_error(), comp.state_sat_error());
    for i in 0..en.first().map_or(0, |v| v.len()) {
        out.push((
            format!("state_error_{}.svg", i + 1),
            base(
                format!("saturation error, channel {}", i + 1),
                format!("yhat{0} - y{0}", i + 1),
                vec![
                    Series::new("nominal", column(&en, i)),
                    Series::new("compensated", column(&ec, i)),
                ],
            ),
        ));
    }
    for j in 0..nom.u.first().map_or(0, |v| v.len()) {
        let mut series = vec![
            Series::new("nominal u", column(&nom.u, j)),
            Series::new("compensated u", column(&comp.u, j)),
        ];
        if comp.u_hat != comp.u {
            series.push(Series::new("compensated uhat", column(&comp.u_hat, j)).dashed());
        }
        out.push((
            format!("input_{}.svg", j + 1),
            base(format!("control input {}", j + 1), format!("u{}", j + 1), series),
        ));
    }
    for &i in &nom.tracking {
        out.push((
            format!("output_{}.svg", i + 1),
            base(
                format!("measured output {} and reference", i + 1),
                format!("y{}", i + 1),
                vec![
                    Series::new("nominal", column(&nom.y_meas, i)),
                    Series::new("compensated", column(&comp.y_meas, i)),
                    Series::new("reference", column(&nom.r, i)).dashed(),
                ],
            ),
        ));
    }
    out
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run_inner(s: &ScenarioFile, out: &Path, seed: u64) -> Result<MetricsFile> {
    let outcome = match &s.plant {
        PlantSpec::Vsc { study, fault } => {
            let study = study.clone().unwrap_or_default();
            let f = FaultScenario::new(fault.resistance, fault.start, fault.end)?;
            run_vsc(s, &study, &f, seed)?
        }
        _ => run_linear(s, seed)?,
    };
    if let Some(d) = &outcome.design {
        write(&out.join("design.json"), DesignFile::new(d.clone()).to_json().as_bytes())?;
    }
    if s.export.traces {
        for (name, t) in [("trace_nominal.csv", &outcome.nominal), ("trace_compensated.csv", &outcome.compensated)] {
            let mut buf = Vec::new();
            t.to_csv(&mut buf)?;
            write(&out.join(name), &buf)?;
        }
    }
    if s.export.plots {
        for (name, p) in plots(&outcome.nominal, &outcome.compensated) {
            write(&out.join(name), p.to_svg().as_bytes())?;
        }
    }
    let m = MetricsFile {
        schema_version: METRICS_SCHEMA_VERSION,
        scenario: s.id.clone(),
        method: s.method.name().into(),
        seed,
        design: outcome.summary,
        nominal: metrics(&outcome.nominal),
        compensated: metrics(&outcome.compensated),
        converter: outcome.converter,
    };
    let mut text = serde_json::to_string_pretty(&m)?;
    text.push('\n');
    write(&out.join("metrics.json"), text.as_bytes())?;
    Ok(m)
}

/// Runs one scenario into `out`. On failure the error chain is also
/// written to `out/error.txt`.
pub fn run(s: &ScenarioFile, out: &Path, seed: Option<u64>) -> Result<MetricsFile> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let seed = seed.unwrap_or(s.seed);
    let r = run_inner(s, out, seed).with_context(|| format!("scenario `{}` failed", s.id));
    if let Err(e) = &r {
        let _ = fs::write(out.join("error.txt"), format!("{e:#}\n"));
    }
    r
}
