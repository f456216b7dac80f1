use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub max_iter: usize,
    /// Number of stored correction pairs.
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking attempts per line search.
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { max_iter: 2000, memory: 10, armijo: 1e-4, max_backtracks: 60 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with backtracking Armijo line search (relaxed to
/// rounding level near a minimum). `eval` returns
/// the objective and its gradient; `converged(value, gradient)` decides
/// termination. Returns the last accepted iterate with `converged = false`
/// when the iteration cap is hit or no further decrease is possible.
pub fn lbfgs(
    eval: &dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
    converged: &dyn Fn(f64, &[f64]) -> bool,
    x0: Vec<f64>,
    config: &LbfgsConfig,
) -> Result<LbfgsResult> {
    let mut x = x0;
    let (mut f, mut g) = eval(&x)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEnergy);
    }
    let mut trace = vec![f];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for iter in 0..config.max_iter {
        if converged(f, &g) {
            return Ok(LbfgsResult { x, value: f, trace, iterations: iter, converged: true });
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = if pairs.is_empty() {
            1.0 / dot(&g, &g).sqrt().max(1e-300)
        } else {
            1.0
        };
        let mut accepted = None;
        let mut last_nonfinite = false;
        for _ in 0..config.max_backtracks {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            match eval(&xn) {
                Ok((fnew, gnew)) if fnew.is_finite() && gnew.iter().all(|v| v.is_finite()) => {
                    last_nonfinite = false;
                    // near a minimum the decrease drops below rounding; then
                    // accept any step that reduces the gradient without
                    // raising the value beyond rounding
                    let armijo = fnew <= f + config.armijo * step * slope;
                    let flat = fnew <= f + 1e-14 * f.abs().max(1e-300) && dot(&gnew, &gnew) < dot(&g, &g);
                    if armijo || flat {
                        accepted = Some((xn, fnew, gnew));
                        break;
                    }
                }
                Ok(_) | Err(Error::NonFiniteEnergy) => last_nonfinite = true,
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if last_nonfinite {
                return Err(Error::NonFiniteEnergy);
            }
            // no sufficient decrease at machine precision
            return Ok(LbfgsResult { x, value: f, trace, iterations: iter, converged: converged(f, &g) });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if pairs.len() == config.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gnew;
        trace.push(f);
    }
    let done = converged(f, &g);
    Ok(LbfgsResult { x, value: f, trace, iterations: config.max_iter, converged: done })
}
