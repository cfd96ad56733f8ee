//! Derivative-free local search: adaptive coordinate pattern search followed
//! by a Nelder-Mead polish.

/// Objective wrapper that counts evaluations and tracks the incumbent.
pub(crate) struct Tracked<'a, F: Fn(&[f64]) -> f64> {
    f: &'a F,
    pub evaluations: usize,
    pub budget: usize,
    pub best: f64,
    pub best_x: Vec<f64>,
    /// Incumbent value after every improvement.
    pub trace: Vec<f64>,
}

impl<'a, F: Fn(&[f64]) -> f64> Tracked<'a, F> {
    pub fn new(f: &'a F, x0: &[f64], budget: usize) -> Self {
        let v = f(x0);
        Self {
            f,
            evaluations: 1,
            budget,
            best: v,
            best_x: x0.to_vec(),
            trace: vec![v],
        }
    }

    pub fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    pub fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v < self.best {
            self.best = v;
            self.best_x = x.to_vec();
            self.trace.push(v);
        }
        v
    }
}

/// Per-coordinate steps grow after a success and shrink after a failed
/// probe in both directions.
pub(crate) fn pattern_search<F: Fn(&[f64]) -> f64>(
    t: &mut Tracked<'_, F>,
    steps: &[f64],
    min_step: f64,
    budget: usize,
) {
    let mut x = t.best_x.clone();
    let mut fx = t.best;
    let mut s = steps.to_vec();
    let n = x.len();
    while !t.exhausted() && t.evaluations < budget {
        if s.iter().all(|&v| v < min_step) {
            break;
        }
        for i in 0..n {
            if t.exhausted() || t.evaluations >= budget {
                break;
            }
            if s[i] < min_step {
                continue;
            }
            let xi = x[i];
            let mut moved = false;
            for dir in [1.0, -1.0] {
                x[i] = xi + dir * s[i];
                let v = t.eval(&x);
                if v < fx {
                    fx = v;
                    moved = true;
                    s[i] *= 2.0;
                    break;
                }
            }
            if !moved {
                x[i] = xi;
                s[i] *= 0.5;
            }
        }
    }
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2) started from the incumbent.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(
    t: &mut Tracked<'_, F>,
    scale: f64,
    ftol: f64,
    budget: usize,
) {
    let n = t.best_x.len();
    if n == 0 {
        return;
    }
    let x0 = t.best_x.clone();
    let mut simplex = vec![(x0.clone(), t.best)];
    for i in 0..n {
        if t.exhausted() || t.evaluations >= budget {
            return;
        }
        let mut x = x0.clone();
        x[i] += scale * (1.0 + x0[i].abs());
        let v = t.eval(&x);
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    };
    let point = |c: &[f64], w: &[f64], a: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(ci, wi)| ci + a * (wi - ci)).collect()
    };
    while !t.exhausted() && t.evaluations < budget {
        order(&mut simplex);
        let (fl, fh) = (simplex[0].1, simplex[n].1);
        if (fh - fl).abs() <= ftol * (fl.abs() + ftol) {
            break;
        }
        let mut c = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let xr = point(&c, &worst, -1.0);
        let fr = t.eval(&xr);
        if fr < fl {
            let xe = point(&c, &worst, -2.0);
            let fe = t.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < fh {
                let xc = point(&c, &xr, 0.5);
                let fc = t.eval(&xc);
                (xc, fc)
            } else {
                let xc = point(&c, &worst, 0.5);
                let fc = t.eval(&xc);
                (xc, fc)
            };
            if fc < fh.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for k in 1..=n {
                    if t.exhausted() {
                        return;
                    }
                    let xs = point(&best, &simplex[k].0, 0.5);
                    let fs = t.eval(&xs);
                    simplex[k] = (xs, fs);
                }
            }
        }
    }
}
