//! Generalized plants for output and joint input-state anti-windup, and
//! fixed-structure H-infinity synthesis by multi-start derivative-free
//! minimization of the closed-loop norm.

mod optimize;
mod plant;
mod structure;

pub use plant::*;
pub use structure::*;

use crate::design::TransferDesign;
use crate::lti::{hinf_norm, LtiError, StateSpaceModel, HINF_DEFAULT_TOL};
use crate::matrix::eigenvalues;
use optimize::{nelder_mead, pattern_search, Tracked};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Objective scale for closed loops that are unstable or ill-posed.
pub const NORM_CAP: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("structure: {0}")]
    Structure(String),
    #[error("no stabilizing compensator found; best closed-loop spectral abscissa {best_abscissa}")]
    NoStabilizingPoint { best_abscissa: f64 },
    #[error(transparent)]
    Lti(#[from] LtiError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub seed: u64,
    pub starts: usize,
    /// Objective evaluations per start.
    pub max_evaluations: usize,
    /// Relative accuracy of the norm inside the search.
    pub search_tol: f64,
    /// Relative accuracy of the reported norm.
    pub verify_tol: f64,
    pub min_step: f64,
    /// Spread of the random gains drawn for starts after the first.
    pub gain_scale: f64,
    /// Worker threads for the starts; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 20,
            max_evaluations: 5000,
            search_tol: 1e-5,
            verify_tol: HINF_DEFAULT_TOL,
            min_step: 1e-6,
            gain_scale: 1.0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Norm of the start's best point at the reporting accuracy.
    pub verified_norm: Option<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub structure: CompensatorStructure,
    pub params: Vec<f64>,
    pub compensator: StateSpaceModel,
    pub achieved_norm: f64,
    /// Norm with the compensator output forced to zero.
    pub zero_norm: Option<f64>,
    pub stable: bool,
    pub spectral_abscissa: f64,
    /// Incumbent objective, starts taken in index order.
    pub history: Vec<f64>,
    pub starts: Vec<StartRecord>,
    pub evaluations: usize,
}

impl SynthesisResult {
    /// Design file entry for a compensator fed by `[yhat - y; uhat - u]` and
    /// producing `[u_my; u_mu]`.
    pub fn to_transfer_design(&self, n_state_err: usize, n_u_my: usize) -> TransferDesign {
        let c = &self.compensator;
        TransferDesign {
            model: c.clone(),
            n_state_err,
            n_input_err: c.ninputs() - n_state_err,
            n_u_my,
            n_u_mu: c.noutputs() - n_u_my,
            achieved_norm: Some(self.achieved_norm),
            structure: self.structure.name.clone(),
        }
    }
}

/// Closed-loop norm and spectral abscissa for one compensator.
pub fn evaluate(
    p: &GeneralizedPlant,
    c: &StateSpaceModel,
    tol: f64,
) -> Result<(Option<f64>, f64), SynthError> {
    let cl = closed_loop(p, c)?;
    let abscissa = if cl.nstates() == 0 {
        f64::NEG_INFINITY
    } else {
        eigenvalues(&cl.a).map_err(LtiError::from)?.abscissa()
    };
    if abscissa >= 0.0 {
        return Ok((None, abscissa));
    }
    Ok((hinf_norm(&cl, tol)?.value(), abscissa))
}

fn objective(p: &GeneralizedPlant, s: &CompensatorStructure, theta: &[f64], tol: f64) -> f64 {
    if theta.iter().any(|v| !v.is_finite()) {
        return 2.0 * NORM_CAP;
    }
    match evaluate(p, &s.realize(theta), tol) {
        Ok((Some(v), _)) => v,
        Ok((None, a)) if a.is_finite() => NORM_CAP * (1.0 + a.max(0.0)),
        _ => 2.0 * NORM_CAP,
    }
}

fn check_compatible(p: &GeneralizedPlant, s: &CompensatorStructure) -> Result<(), SynthError> {
    s.validate().map_err(SynthError::Structure)?;
    if s.n_in != p.n_meas || s.n_out != p.n_ctrl {
        return Err(SynthError::Structure(format!(
            "structure is {}x{}, plant expects {}x{}",
            s.n_out, s.n_in, p.n_ctrl, p.n_meas
        )));
    }
    Ok(())
}

fn start_point(s: &CompensatorStructure, base: &[f64], index: usize, opts: &SynthOptions) -> Vec<f64> {
    if index == 0 {
        return base.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(1_000_003).wrapping_add(index as u64));
    let neutral = s.neutral_params();
    s.param_kinds()
        .iter()
        .zip(&neutral)
        .map(|(k, &v)| match k {
            ParamKind::PoleRate => v + rng.gen_range(-1.5..1.5),
            ParamKind::PoleFrequency => v * rng.gen_range(0.0..3.0),
            ParamKind::Gain => opts.gain_scale * rng.gen_range(-1.0..1.0),
        })
        .collect()
}

struct StartOutcome {
    best_x: Vec<f64>,
    record: StartRecord,
    trace: Vec<f64>,
}

fn run_start(
    p: &GeneralizedPlant,
    s: &CompensatorStructure,
    x0: Vec<f64>,
    index: usize,
    opts: &SynthOptions,
) -> StartOutcome {
    let f = |x: &[f64]| objective(p, s, x, opts.search_tol);
    let budget = opts.max_evaluations.max(1);
    let mut t = Tracked::new(&f, &x0, budget);
    let initial = t.best;
    let steps: Vec<f64> = s
        .param_kinds()
        .iter()
        .zip(&x0)
        .map(|(k, v)| match k {
            ParamKind::Gain => 0.25 * (1.0 + v.abs()),
            _ => 0.5,
        })
        .collect();
    pattern_search(&mut t, &steps, opts.min_step, budget * 4 / 5);
    nelder_mead(&mut t, 0.05, 1e-10, budget);
    let verify = |x: &[f64]| {
        evaluate(p, &s.realize(x), opts.verify_tol)
            .ok()
            .and_then(|(v, _)| v)
    };
    let mut verified = verify(&t.best_x);
    // the search runs at a looser accuracy, so keep the start point when it
    // verifies lower
    if t.best_x != x0 {
        if let Some(v0) = verify(&x0) {
            if verified.map_or(true, |v| v0 <= v) {
                verified = Some(v0);
                t.best_x = x0.clone();
            }
        }
    }
    StartOutcome {
        record: StartRecord {
            index,
            initial_objective: initial,
            final_objective: t.best,
            verified_norm: verified,
            evaluations: t.evaluations,
        },
        best_x: t.best_x,
        trace: t.trace,
    }
}

/// Minimizes the closed-loop H-infinity norm over the parameters of
/// `structure`. Start 0 begins at `initial` (the zero compensator when
/// `None`); further starts are seeded random draws. The reported design is
/// the start whose best point has the smallest verified norm, ties going to
/// the lower index.
pub fn synth_with_start(
    p: &GeneralizedPlant,
    structure: &CompensatorStructure,
    initial: Option<Vec<f64>>,
    opts: &SynthOptions,
) -> Result<SynthesisResult, SynthError> {
    check_compatible(p, structure)?;
    let base = match initial {
        Some(x) if x.len() == structure.nparams() => x,
        Some(x) => {
            return Err(SynthError::Structure(format!(
                "initial point has {} parameters, structure needs {}",
                x.len(),
                structure.nparams()
            )))
        }
        None => structure.neutral_params(),
    };
    let starts = opts.starts.max(1);
    let threads = opts
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, starts);
    let points: Vec<Vec<f64>> = (0..starts)
        .map(|i| start_point(structure, &base, i, opts))
        .collect();
    let mut outcomes: Vec<Option<StartOutcome>> = (0..starts).map(|_| None).collect();
    if threads == 1 {
        for (i, x0) in points.into_iter().enumerate() {
            outcomes[i] = Some(run_start(p, structure, x0, i, opts));
        }
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let pts = &points;
                    scope.spawn(move || {
                        (w..starts)
                            .step_by(threads)
                            .map(|i| (i, run_start(p, structure, pts[i].clone(), i, opts)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, o) in h.join().expect("synthesis worker panicked") {
                    outcomes[i] = Some(o);
                }
            }
        });
    }
    let outcomes: Vec<StartOutcome> = outcomes.into_iter().map(|o| o.expect("every start ran")).collect();

    let mut history = Vec::new();
    let mut incumbent = f64::INFINITY;
    for o in &outcomes {
        for &v in &o.trace {
            incumbent = incumbent.min(v);
            history.push(incumbent);
        }
    }
    let evaluations = outcomes.iter().map(|o| o.record.evaluations).sum();
    let chosen = outcomes
        .iter()
        .filter_map(|o| o.record.verified_norm.map(|v| (v, o)))
        .fold(None::<(f64, &StartOutcome)>, |acc, (v, o)| match acc {
            Some((bv, _)) if bv <= v => acc,
            _ => Some((v, o)),
        });
    let Some((norm, best)) = chosen else {
        let best_abscissa = outcomes
            .iter()
            .filter_map(|o| evaluate(p, &structure.realize(&o.best_x), opts.verify_tol).ok())
            .map(|(_, a)| a)
            .fold(f64::INFINITY, f64::min);
        return Err(SynthError::NoStabilizingPoint { best_abscissa });
    };
    let compensator = structure.realize(&best.best_x);
    let (_, abscissa) = evaluate(p, &compensator, opts.verify_tol)?;
    let zero = StateSpaceModel::zero(p.n_ctrl, p.n_meas);
    let zero_norm = evaluate(p, &zero, opts.verify_tol)?.0;
    Ok(SynthesisResult {
        structure: structure.clone(),
        params: best.best_x.clone(),
        compensator,
        achieved_norm: norm,
        zero_norm,
        stable: abscissa < 0.0,
        spectral_abscissa: abscissa,
        history,
        starts: outcomes.into_iter().map(|o| o.record).collect(),
        evaluations,
    })
}

pub fn synth_fixed_structure(
    p: &GeneralizedPlant,
    structure: &CompensatorStructure,
    opts: &SynthOptions,
) -> Result<SynthesisResult, SynthError> {
    synth_with_start(p, structure, None, opts)
}

/// Unstructured compensator with `orders[i]` states per measurement column.
/// A `warm_start` from a structure nested in the full one (same per-column
/// orders) seeds start 0, so the result is never worse than it.
pub fn synth_full_matrix(
    p: &GeneralizedPlant,
    orders: &[usize],
    opts: &SynthOptions,
    warm_start: Option<&SynthesisResult>,
) -> Result<SynthesisResult, SynthError> {
    let full = CompensatorStructure::full(p.n_meas, p.n_ctrl, orders.to_vec());
    let initial = match warm_start {
        Some(w) => Some(full.embed(&w.structure, &w.params).ok_or_else(|| {
            SynthError::Structure(format!(
                "warm start structure '{}' is not nested in the full structure",
                w.structure.name
            ))
        })?),
        None => None,
    };
    synth_with_start(p, &full, initial, opts)
}

#[cfg(test)]
mod tests;
