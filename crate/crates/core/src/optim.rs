//! Nelder–Mead minimisation with a hard evaluation budget.
//!
//! Uses the dimension-adaptive coefficients of Gao and Han. When the simplex
//! collapses before the budget is spent, a fresh simplex is built around the
//! incumbent and the search continues; each rebuild that brought no
//! improvement doubles the edge length of the next one, up to `max_step`.

#[derive(Clone, Debug)]
pub struct NelderMead {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Edge length of the first simplex.
    pub initial_step: f64,
    /// Cap on the edge length of rebuilt simplices.
    pub max_step: f64,
    /// A simplex whose values span less than this is considered collapsed.
    pub value_tol: f64,
    /// A simplex whose largest edge from the best vertex is below this is
    /// considered collapsed.
    pub size_tol: f64,
    /// A simplex is also rebuilt when `stall_window · (n + 1)` evaluations
    /// improve the best value by less than `stall_ratio` of itself.
    pub stall_window: usize,
    pub stall_ratio: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            initial_step: 0.5,
            max_step: 4.0,
            value_tol: 1e-16,
            size_tol: 1e-10,
            stall_window: 50,
            stall_ratio: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    used: usize,
    cap: usize,
    best: Option<(f64, Vec<f64>)>,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn exhausted(&self) -> bool {
        self.used >= self.cap
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.used += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if self.best.as_ref().is_none_or(|(b, _)| v < *b) {
            self.best = Some((v, x.to_vec()));
        }
        v
    }
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, f: F, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut obj = Counted {
            f,
            used: 0,
            cap: self.max_evals.max(1),
            best: None,
        };
        if n == 0 {
            let value = obj.eval(x0);
            return Minimum {
                x: vec![],
                value,
                evaluations: obj.used,
            };
        }
        let nf = n as f64;
        let (reflect, expand) = (1.0, 1.0 + 2.0 / nf);
        let (contract, shrink) = (0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);

        let mut start = x0.to_vec();
        let mut step = self.initial_step;
        let mut last_best = f64::INFINITY;
        'restart: while !obj.exhausted() {
            if let Some((best, x)) = &obj.best {
                if *best < last_best {
                    step = self.initial_step;
                } else {
                    step = (2.0 * step).min(self.max_step);
                }
                last_best = *best;
                start = x.clone();
            }
            let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
            let v = obj.eval(&start);
            simplex.push((v, start.clone()));
            for i in 0..n {
                if obj.exhausted() {
                    break 'restart;
                }
                let mut p = start.clone();
                p[i] += step;
                let v = obj.eval(&p);
                simplex.push((v, p));
            }

            let window = self.stall_window.max(1) * (n + 1);
            let mut checkpoint = (
                obj.used,
                simplex.iter().map(|v| v.0).fold(f64::INFINITY, f64::min),
            );
            loop {
                simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
                if obj.exhausted() || self.collapsed(&simplex) {
                    continue 'restart;
                }
                if obj.used - checkpoint.0 >= window {
                    let (was, now) = (checkpoint.1, simplex[0].0);
                    let improved = was - now > self.stall_ratio * now.abs();
                    if !improved {
                        continue 'restart;
                    }
                    checkpoint = (obj.used, now);
                }
                let centroid: Vec<f64> = (0..n)
                    .map(|i| simplex[..n].iter().map(|(_, p)| p[i]).sum::<f64>() / nf)
                    .collect();
                let worst = simplex[n].clone();
                let along = |t: f64| -> Vec<f64> {
                    centroid
                        .iter()
                        .zip(&worst.1)
                        .map(|(c, w)| c + t * (c - w))
                        .collect()
                };

                let xr = along(reflect);
                let fr = obj.eval(&xr);
                if fr < simplex[0].0 {
                    if obj.exhausted() {
                        simplex[n] = (fr, xr);
                        continue;
                    }
                    let xe = along(reflect * expand);
                    let fe = obj.eval(&xe);
                    simplex[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
                    continue;
                }
                if fr < simplex[n - 1].0 {
                    simplex[n] = (fr, xr);
                    continue;
                }
                if obj.exhausted() {
                    continue;
                }
                let (xc, fc, accept) = if fr < worst.0 {
                    let xc = along(reflect * contract);
                    let fc = obj.eval(&xc);
                    (xc, fc, fc <= fr)
                } else {
                    let xc = along(-contract);
                    let fc = obj.eval(&xc);
                    (xc, fc, fc < worst.0)
                };
                if accept {
                    simplex[n] = (fc, xc);
                    continue;
                }
                let best = simplex[0].1.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    if obj.exhausted() {
                        break;
                    }
                    let p: Vec<f64> = best
                        .iter()
                        .zip(&vertex.1)
                        .map(|(b, x)| b + shrink * (x - b))
                        .collect();
                    *vertex = (obj.eval(&p), p);
                }
            }
        }

        let (value, x) = obj.best.expect("at least one evaluation");
        Minimum {
            x,
            value,
            evaluations: obj.used,
        }
    }

    fn collapsed(&self, sorted: &[(f64, Vec<f64>)]) -> bool {
        let (lo, hi) = (sorted[0].0, sorted[sorted.len() - 1].0);
        if lo.is_finite() && hi.is_finite() && hi - lo <= self.value_tol {
            return true;
        }
        let best = &sorted[0].1;
        sorted[1..].iter().all(|(_, p)| {
            p.iter()
                .zip(best)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < self.size_tol
        })
    }
}
