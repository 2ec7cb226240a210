//! Multi-start projected quasi-Newton baseline with finite-difference
//! gradients, for comparison against agent-driven studies.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::space::{DesignSpace, Direction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineOptions {
    /// Finite-difference step as a fraction of each dimension's range.
    pub fd_rel_step: f64,
    pub armijo_c: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub max_halvings: usize,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            fd_rel_step: 1e-6,
            armijo_c: 1e-4,
            grad_tol: 1e-8,
            max_iter: 200,
            memory: 10,
            max_halvings: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineStop {
    GradientTolerance,
    IterationLimit,
    LineSearchFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub run_index: usize,
    pub start: Vec<f64>,
    pub final_point: Vec<f64>,
    /// Objective at `final_point`, in the caller's sign convention.
    pub final_objective: f64,
    pub best_objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: BaselineStop,
    /// `(eval_index, best objective so far)` after every evaluation.
    pub trace: Vec<(usize, f64)>,
}

struct Counted<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    sign: f64,
    evals: usize,
    best: f64,
    trace: Vec<(usize, f64)>,
}

impl Counted<'_> {
    /// Minimization-sense value; bookkeeping is in the caller's sense.
    fn call(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        let m = self.sign * v;
        if m < self.best {
            self.best = m;
        }
        self.trace.push((self.evals, self.sign * self.best));
        self.evals += 1;
        m
    }
}

fn project(space: &DesignSpace, x: &[f64]) -> Vec<f64> {
    space.clip(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gradient(c: &mut Counted<'_>, space: &DesignSpace, x: &[f64], fx: f64, rel: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        let h = rel * space.range(i);
        let up = x[i] + h <= space.upper[i];
        let down = x[i] - h >= space.lower[i];
        g[i] = if up && down {
            p[i] = x[i] + h;
            let fp = c.call(&p);
            p[i] = x[i] - h;
            let fm = c.call(&p);
            (fp - fm) / (2.0 * h)
        } else if up {
            p[i] = x[i] + h;
            (c.call(&p) - fx) / h
        } else {
            p[i] = x[i] - h;
            (fx - c.call(&p)) / h
        };
        p[i] = x[i];
    }
    g
}

/// Norm of the projected-gradient step `P(x - g) - x`.
fn projected_grad_norm(space: &DesignSpace, x: &[f64], g: &[f64]) -> f64 {
    let step: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    let p = project(space, &step);
    p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// One projected L-BFGS descent from `x0`, minimizing `f` in `direction`.
pub fn minimize_projected(
    f: &mut dyn FnMut(&[f64]) -> f64,
    space: &DesignSpace,
    x0: &[f64],
    direction: Direction,
    opts: &BaselineOptions,
) -> BaselineRun {
    let mut c = Counted {
        f,
        sign: if direction == Direction::Maximize { -1.0 } else { 1.0 },
        evals: 0,
        best: f64::INFINITY,
        trace: Vec::new(),
    };
    let mut x = project(space, x0);
    let mut fx = c.call(&x);
    let mut g = gradient(&mut c, space, &x, fx, opts.fd_rel_step);
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mean_range = (0..space.dim()).map(|i| space.range(i)).sum::<f64>() / space.dim() as f64;
    let mut iterations = 0;
    let stop = loop {
        if projected_grad_norm(space, &x, &g) < opts.grad_tol {
            break BaselineStop::GradientTolerance;
        }
        if iterations >= opts.max_iter {
            break BaselineStop::IterationLimit;
        }
        iterations += 1;
        let mut d = if mem.is_empty() {
            let n = dot(&g, &g).sqrt();
            g.iter().map(|v| -v * 0.1 * mean_range / n).collect()
        } else {
            two_loop(&g, &mem)
        };
        let mut accepted = None;
        for attempt in 0..2 {
            let mut alpha = 1.0;
            for _ in 0..opts.max_halvings {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let trial = project(space, &trial);
                let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let slope = dot(&g, &step);
                if slope >= 0.0 {
                    break;
                }
                let ft = c.call(&trial);
                if ft <= fx + opts.armijo_c * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() || attempt == 1 {
                break;
            }
            // Quasi-Newton direction failed: restart from steepest descent.
            mem.clear();
            let n = dot(&g, &g).sqrt();
            d = g.iter().map(|v| -v * 0.1 * mean_range / n).collect();
        }
        let Some((xn, fnew)) = accepted else {
            break BaselineStop::LineSearchFailed;
        };
        let gn = gradient(&mut c, space, &xn, fnew, opts.fd_rel_step);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            mem.push_back((s, y, 1.0 / sy));
            if mem.len() > opts.memory {
                mem.pop_front();
            }
        }
        x = xn;
        fx = fnew;
        g = gn;
    };
    BaselineRun {
        run_index: 0,
        start: x0.to_vec(),
        final_point: x,
        final_objective: c.sign * fx,
        best_objective: c.sign * c.best,
        iterations,
        evaluations: c.evals,
        stop,
        trace: c.trace,
    }
}

/// `n_starts` descents from uniform random starts drawn with `seed`.
pub fn baseline_multistart(
    space: &DesignSpace,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    direction: Direction,
    n_starts: usize,
    seed: u64,
    opts: &BaselineOptions,
) -> Vec<BaselineRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..n_starts)
        .map(|_| {
            (0..space.dim())
                .map(|i| space.lower[i] + rng.random::<f64>() * space.range(i))
                .collect()
        })
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .into_iter()
            .enumerate()
            .map(|(k, x0)| {
                scope.spawn(move || {
                    let mut g = |x: &[f64]| f(x);
                    let mut run = minimize_projected(&mut g, space, &x0, direction, opts);
                    run.run_index = k;
                    run
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("baseline run panicked")).collect()
    })
}
