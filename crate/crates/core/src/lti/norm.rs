//! Frequency response, stability and the H-infinity norm.

use super::{LtiError, StateSpaceModel};
use crate::matrix::{
    eigenvalues, max_singular_value, max_singular_value_real, solve, CMatrix, Matrix, C64,
};

/// Default relative accuracy of [`hinf_norm`].
pub const HINF_DEFAULT_TOL: f64 = 1e-6;
/// Eigenvalues must satisfy `Re < -HURWITZ_TOL` for [`is_hurwitz`].
pub const HURWITZ_TOL: f64 = 1e-10;
/// Hamiltonian eigenvalues with `|Re| <= IMAG_AXIS_TOL * max(1, |lambda|)`
/// count as imaginary.
const IMAG_AXIS_TOL: f64 = 1e-7;
const MAX_LEVEL_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HinfNorm {
    Finite { value: f64, peak_frequency: f64 },
    /// The model has a pole in the closed right half-plane.
    Infinite,
}

impl HinfNorm {
    pub fn value(&self) -> Option<f64> {
        match self {
            HinfNorm::Finite { value, .. } => Some(*value),
            HinfNorm::Infinite => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, HinfNorm::Finite { .. })
    }
}

/// Evaluates `C (jwI - A)^-1 B + D` repeatedly through a one-off Hessenberg
/// reduction of `A`, so each frequency costs O(n^2) per input column.
#[derive(Debug, Clone)]
pub struct FrequencyEvaluator {
    h: Matrix,
    bq: Matrix,
    cq: Matrix,
    d: Matrix,
    poles: Vec<C64>,
}

impl FrequencyEvaluator {
    pub fn new(s: &StateSpaceModel) -> Result<Self, LtiError> {
        let n = s.nstates();
        if n == 0 {
            return Ok(Self {
                h: Matrix::zeros(0, 0),
                bq: s.b.clone(),
                cq: s.c.clone(),
                d: s.d.clone(),
                poles: Vec::new(),
            });
        }
        let (q, h) = s.a.clone().hessenberg().unpack();
        Ok(Self {
            bq: q.transpose() * &s.b,
            cq: &s.c * &q,
            h,
            d: s.d.clone(),
            poles: eigenvalues(&s.a)?.values,
        })
    }

    pub fn poles(&self) -> &[C64] {
        &self.poles
    }

    pub fn eval(&self, omega: f64) -> Result<CMatrix, LtiError> {
        let jw = C64::new(0.0, omega);
        if self
            .poles
            .iter()
            .any(|p| (jw - p).norm() <= 1e-10 * p.norm().max(1.0))
        {
            return Err(LtiError::Resonance { omega });
        }
        let n = self.h.nrows();
        let m = self.d.ncols();
        let mut out = self.d.map(|v| C64::new(v, 0.0));
        if n == 0 {
            return Ok(out);
        }
        let mut mat = CMatrix::from_fn(n, n, |i, j| {
            let v = C64::new(-self.h[(i, j)], 0.0);
            if i == j {
                v + jw
            } else {
                v
            }
        });
        let mut rhs = self.bq.map(|v| C64::new(v, 0.0));
        // Gaussian elimination exploiting the single subdiagonal
        for k in 0..n.saturating_sub(1) {
            if mat[(k + 1, k)].norm() > mat[(k, k)].norm() {
                mat.swap_rows(k, k + 1);
                rhs.swap_rows(k, k + 1);
            }
            let piv = mat[(k, k)];
            if piv.norm() == 0.0 {
                return Err(LtiError::Resonance { omega });
            }
            let l = mat[(k + 1, k)] / piv;
            if l.norm() != 0.0 {
                for j in k..n {
                    let v = mat[(k, j)];
                    mat[(k + 1, j)] -= l * v;
                }
                for j in 0..m {
                    let v = rhs[(k, j)];
                    rhs[(k + 1, j)] -= l * v;
                }
            }
        }
        for i in (0..n).rev() {
            let piv = mat[(i, i)];
            if piv.norm() == 0.0 {
                return Err(LtiError::Resonance { omega });
            }
            for j in 0..m {
                let mut acc = rhs[(i, j)];
                for k in i + 1..n {
                    acc -= mat[(i, k)] * rhs[(k, j)];
                }
                rhs[(i, j)] = acc / piv;
            }
        }
        let cq = self.cq.map(|v| C64::new(v, 0.0));
        out += cq * rhs;
        Ok(out)
    }

    pub fn max_sv(&self, omega: f64) -> Result<f64, LtiError> {
        Ok(max_singular_value(&self.eval(omega)?))
    }
}

/// `C (jwI - A)^-1 B + D`.
pub fn frequency_response(s: &StateSpaceModel, omega: f64) -> Result<CMatrix, LtiError> {
    FrequencyEvaluator::new(s)?.eval(omega)
}

/// True iff every eigenvalue of `A` has real part below `-tol`.
pub fn is_hurwitz(s: &StateSpaceModel, tol: f64) -> bool {
    if s.nstates() == 0 {
        return true;
    }
    match eigenvalues(&s.a) {
        Ok(e) => e.abscissa() < -tol,
        Err(_) => false,
    }
}

/// `n` points per decade, log-spaced over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = ((decades * per_decade as f64).ceil() as usize).max(1);
    (0..=count)
        .map(|k| lo * 10f64.powf(decades * k as f64 / count as f64))
        .collect()
}

/// Largest singular value over a frequency grid, with its frequency.
pub fn frequency_sweep_max(
    s: &StateSpaceModel,
    grid: &[f64],
) -> Result<(f64, f64), LtiError> {
    let ev = FrequencyEvaluator::new(s)?;
    let mut best = (max_singular_value_real(&s.d), f64::INFINITY);
    for &w in grid {
        if let Ok(v) = ev.max_sv(w) {
            if v > best.0 {
                best = (v, w);
            }
        }
    }
    Ok(best)
}

fn default_probe_frequencies(poles: &[C64]) -> Vec<f64> {
    let mags: Vec<f64> = poles.iter().map(|p| p.norm()).filter(|m| *m > 0.0).collect();
    let lo = mags.iter().copied().fold(1.0, f64::min) * 1e-2;
    let hi = mags.iter().copied().fold(1.0, f64::max) * 1e2;
    let mut grid = vec![0.0];
    grid.extend(log_grid(lo, hi, 10));
    for p in poles {
        grid.push(p.im.abs());
        grid.push(p.norm());
    }
    grid
}

/// Imaginary-axis crossing frequencies of the level-`gamma` Hamiltonian.
fn crossing_frequencies(s: &StateSpaceModel, gamma: f64) -> Result<Vec<f64>, LtiError> {
    let n = s.nstates();
    let m = s.ninputs();
    let p = s.noutputs();
    let r = Matrix::identity(m, m) * (gamma * gamma) - s.d.transpose() * &s.d;
    let rinv = solve(&r, &Matrix::identity(m, m))?;
    let a_h = &s.a + &s.b * &rinv * s.d.transpose() * &s.c;
    let top_right = &s.b * &rinv * s.b.transpose();
    let inner = Matrix::identity(p, p) + &s.d * &rinv * s.d.transpose();
    let bottom_left = -(s.c.transpose() * inner * &s.c);
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&top_right);
    h.view_mut((n, 0), (n, n)).copy_from(&bottom_left);
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    let eig = eigenvalues(&h)?;
    let mut freqs: Vec<f64> = eig
        .values
        .iter()
        .filter(|z| z.im >= 0.0 && z.re.abs() <= IMAG_AXIS_TOL * z.norm().max(1.0))
        .map(|z| z.im)
        .collect();
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(freqs)
}

/// H-infinity norm by Hamiltonian level-set iteration.
///
/// A frequency sweep supplies a certified lower bound. Each step tests the
/// level `(1 + 2 tol) * lb`: if its Hamiltonian has no imaginary eigenvalue the
/// level is an upper bound and the iteration stops; otherwise the gain at the
/// midpoints of the crossing intervals raises `lb`. Should rounding produce a
/// spurious crossing, the step falls back to plain bisection between `lb` and
/// the last certified upper bound.
pub fn hinf_norm(s: &StateSpaceModel, tol: f64) -> Result<HinfNorm, LtiError> {
    let dnorm = max_singular_value_real(&s.d);
    if s.nstates() == 0 {
        return Ok(HinfNorm::Finite {
            value: dnorm,
            peak_frequency: 0.0,
        });
    }
    if !is_hurwitz(s, 0.0) {
        return Ok(HinfNorm::Infinite);
    }
    let ev = FrequencyEvaluator::new(s)?;
    let mut lb = dnorm;
    let mut peak = f64::INFINITY;
    for w in default_probe_frequencies(ev.poles()) {
        if let Ok(v) = ev.max_sv(w) {
            if v > lb {
                lb = v;
                peak = w;
            }
        }
    }
    if lb == 0.0 {
        // zero gain everywhere on the grid; confirm with a tiny level
        if crossing_frequencies(s, 1e-300_f64.max(f64::MIN_POSITIVE.sqrt()))?.is_empty() {
            return Ok(HinfNorm::Finite {
                value: 0.0,
                peak_frequency: 0.0,
            });
        }
        lb = f64::MIN_POSITIVE.sqrt();
    }
    let mut ub = f64::INFINITY;
    for _ in 0..MAX_LEVEL_ITERATIONS {
        if ub - lb <= 2.0 * tol * lb {
            break;
        }
        let level = if ub.is_finite() {
            ((1.0 + 2.0 * tol) * lb).max(0.5 * (lb + ub)).min(ub)
        } else {
            (1.0 + 2.0 * tol) * lb
        };
        let crossings = crossing_frequencies(s, level)?;
        if crossings.is_empty() {
            ub = level;
            continue;
        }
        let mut probes = crossings.clone();
        probes.extend(crossings.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        let mut best = (f64::NEG_INFINITY, 0.0);
        for w in probes {
            if let Ok(v) = ev.max_sv(w) {
                if v > best.0 {
                    best = (v, w);
                }
            }
        }
        if best.0 > lb {
            lb = best.0;
            peak = best.1;
        }
        if best.0 < level {
            // crossing not confirmed by the gain: treat the level as an upper bound
            ub = level;
        }
    }
    if !ub.is_finite() {
        ub = lb * (1.0 + 2.0 * tol);
    }
    Ok(HinfNorm::Finite {
        value: 0.5 * (lb + ub).min(2.0 * ub),
        peak_frequency: if peak.is_finite() { peak } else { 0.0 },
    })
}
