use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::energy::EnergyProblem;
use crate::error::{Error, Result};
use crate::field::{Domain, GridField};
use crate::linalg::multi_indices;
use crate::operators::DifferentialOperator;
use crate::rng;
use crate::scalar::Real;
use crate::spectral;

#[derive(Clone, Debug, Serialize)]
pub struct AmplitudeRow {
    pub amplitude: f64,
    /// Largest sampled `int |A u|^p / (int F(A u) + int |A u0| + |A u0|^p + 1)`.
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub integrand: String,
    pub declared_coercivity: Option<f64>,
    /// Smallest admissible constant over all samples (infinite when the
    /// right-hand side is nonpositive for some sample).
    pub constant: f64,
    pub per_amplitude: Vec<AmplitudeRow>,
    /// True when the constant grows by more than a factor 4 from the
    /// smallest to the largest amplitude.
    pub diverges: bool,
    /// Smallest admissible `c` in
    /// `int |u|^p <= c int |A(u - u0)|^p + 2^{p-1} int |u0|^p`.
    pub poincare_constant: Option<f64>,
    pub samples: usize,
}

fn weighted_power(values: &GridField<f64>, weights: &[f64], p: f64) -> f64 {
    super::tree_sum(values.points(), |q| {
        let pts = values.points();
        let r2: f64 = (0..values.components()).map(|c| values.values()[c * pts + q].powi(2)).sum();
        weights[q] * r2.sqrt().powf(p)
    })
}

fn restrict_to_free(problem: &EnergyProblem, phi: &GridField<f64>) -> Result<GridField<f64>> {
    if phi.shape() != problem.shape() || phi.components() != problem.op.dim_v() {
        return Err(Error::DimensionMismatch {
            context: "test field layout vs problem",
            expected: problem.shape().iter().product::<usize>() * problem.op.dim_v(),
            found: phi.values().len(),
        });
    }
    let mut phi = phi.clone();
    let pts = phi.points();
    let free = problem.free_points().to_vec();
    for c in 0..phi.components() {
        for (p, v) in phi.values_mut()[c * pts..(c + 1) * pts].iter_mut().enumerate() {
            if !free[p] {
                *v = 0.0;
            }
        }
    }
    Ok(phi)
}

/// Samples `u = u0 + a phi` over test fields `phi` and the amplitude ladder
/// `amplitudes`, and reports the smallest `c` with
/// `int |A u|^p <= c (int F(A u) + int |A u0| + |A u0|^p + 1)` together with
/// the Poincaré-type constant of the same samples. On the torus `u0` is
/// zero and `A u0` is the mean strain. Test fields are cut off on frozen
/// points.
pub fn coercivity_diagnostic(
    problem: &EnergyProblem,
    phis: &[GridField<f64>],
    amplitudes: &[f64],
) -> Result<CoercivityReport> {
    if phis.is_empty() || amplitudes.is_empty() {
        return Err(Error::InvalidArgument("need test fields and amplitudes".into()));
    }
    let p = problem.integrand.exponent();
    let w = problem.weights();
    let u0 = problem.initial_field();
    let a0 = problem.image(&u0)?;
    let base: f64 = weighted_power(&a0, w, 1.0) + weighted_power(&a0, w, p) + 1.0;
    let u0_p = if problem.is_dirichlet() { weighted_power(&u0, w, p) } else { 0.0 };
    let mut rows = Vec::new();
    let mut poincare: Option<f64> = None;
    let mut constant: f64 = 0.0;
    let phis: Vec<GridField<f64>> = phis.iter().map(|f| restrict_to_free(problem, f)).collect::<Result<_>>()?;
    for &amp in amplitudes {
        let mut row_max: f64 = 0.0;
        for phi in &phis {
            let mut u = u0.clone();
            u.axpy(amp, phi)?;
            let au = problem.image(&u)?;
            let lhs = weighted_power(&au, w, p);
            let rhs = problem.energy(&u)? + base;
            let c = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
            row_max = row_max.max(c);
            let mut diff = au.clone();
            diff.axpy(-1.0, &a0)?;
            let d = weighted_power(&diff, w, p);
            if d > 0.0 {
                let c = ((weighted_power(&u, w, p) - 2f64.powf(p - 1.0) * u0_p) / d).max(0.0);
                poincare = Some(poincare.map_or(c, |q| q.max(c)));
            }
        }
        constant = constant.max(row_max);
        rows.push(AmplitudeRow { amplitude: amp, constant: row_max });
    }
    let diverges = rows.len() > 1 && rows.last().map(|r| r.constant).unwrap_or(0.0) > 4.0 * rows[0].constant;
    Ok(CoercivityReport {
        integrand: problem.integrand.label(),
        declared_coercivity: problem.integrand.coercivity(),
        constant,
        per_amplitude: rows,
        diverges,
        poincare_constant: poincare,
        samples: phis.len() * amplitudes.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalMinimalityReport {
    pub energy: f64,
    /// `min F[u + phi] - F[u]` over the perturbations.
    pub min_increment: f64,
    pub amplitude: f64,
    pub samples: usize,
}

impl LocalMinimalityReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.min_increment >= -tol
    }
}

/// Compares `F[u]` with `F[u + phi]` for `count` random perturbations
/// supported on free points with sup norm `amplitude`.
pub fn local_minimality(
    problem: &EnergyProblem,
    u: &GridField<f64>,
    count: usize,
    amplitude: f64,
    seed: u64,
) -> Result<LocalMinimalityReport> {
    let e0 = problem.energy(u)?;
    let mut min_inc = f64::INFINITY;
    let comps = u.components();
    let shape = u.shape().to_vec();
    for k in 0..count {
        let s = rng::child(seed, k as u64);
        let phi = if k % 2 == 0 {
            let mut f = spectral::random_band_limited::<f64>(&shape, comps, spectral::default_cutoff(&shape).min(4), 1.0, s)?;
            let bump = spectral::bump::<f64>(&shape, 0.45)?;
            let pts = f.points();
            for c in 0..comps {
                for (v, b) in f.component_mut(c).iter_mut().zip(&bump.values()[..pts]) {
                    *v *= b;
                }
            }
            f
        } else {
            // rough pointwise noise
            let mut r = rng::stream(s, 0x10ca1);
            let vals = (0..u.values().len()).map(|_| r.random_range(-1.0..1.0)).collect();
            GridField::new(shape.clone(), comps, vals)?
        };
        let mut phi = restrict_to_free(problem, &phi)?;
        let sup = phi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup == 0.0 {
            continue;
        }
        phi.scale(amplitude / sup);
        let mut v = u.clone();
        v.axpy(1.0, &phi)?;
        min_inc = min_inc.min(problem.energy(&v)? - e0);
    }
    Ok(LocalMinimalityReport { energy: e0, min_increment: min_inc, amplitude, samples: count })
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityConfig {
    /// Number of dyadic radii per cell.
    pub levels: u32,
    /// Cells whose fitted decay exponent falls below this are singular.
    pub threshold: f64,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self { levels: 3, threshold: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    /// Number of cells per axis.
    pub cells: Vec<usize>,
    /// Fitted decay exponent of the local excess per cell (row-major);
    /// `None` where the excess vanishes at every scale.
    pub excess_map: Vec<Option<f64>>,
    pub singular_fraction: f64,
    /// Median fitted exponent over cells with nonzero excess.
    pub alpha_estimate: Option<f64>,
    pub levels: u32,
    pub threshold: f64,
}

/// Local finite difference along `axis`: periodic centered differences on
/// the torus, centered with one-sided closure on boxes.
fn local_difference(src: &[f64], shape: &[usize], axis: usize, periodic: bool) -> Vec<f64> {
    let s = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let (inv_h, closed) = if periodic { (s as f64, false) } else { ((s - 1) as f64, true) };
    (0..src.len())
        .map(|p| {
            let k = (p / stride) % s;
            let base = p - k * stride;
            let at = |j: usize| src[base + j * stride];
            if closed && k == 0 {
                (at(1) - at(0)) * inv_h
            } else if closed && k == s - 1 {
                (at(s - 1) - at(s - 2)) * inv_h
            } else {
                (at((k + 1) % s) - at((k + s - 1) % s)) * 0.5 * inv_h
            }
        })
        .collect()
}

fn unravel(mut p: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        idx[a] = p % shape[a];
        p /= shape[a];
    }
    idx
}

/// Summed-area table on the `(S_a + 1)`-shaped grid.
fn prefix_table(values: &[f64], shape: &[usize]) -> Vec<f64> {
    let ext: Vec<usize> = shape.iter().map(|s| s + 1).collect();
    let total: usize = ext.iter().product();
    let mut t = vec![0.0; total];
    for (p, v) in values.iter().enumerate() {
        let idx = unravel(p, shape);
        let q = idx.iter().zip(&ext).fold(0, |acc, (&i, &e)| acc * e + i + 1);
        t[q] = *v;
    }
    for a in 0..shape.len() {
        let stride: usize = ext[a + 1..].iter().product();
        for q in 0..total {
            if !(q / stride).is_multiple_of(ext[a]) {
                t[q] += t[q - stride];
            }
        }
    }
    t
}

/// Sum over the cube `lo + [0, side)^n`.
fn box_sum(table: &[f64], shape: &[usize], lo: &[usize], side: usize) -> f64 {
    let n = shape.len();
    let mut total = 0.0;
    for corner in 0..(1usize << n) {
        let mut q = 0;
        let mut sign = 1.0;
        for a in 0..n {
            let hi = corner >> a & 1 == 1;
            let i = if hi { lo[a] + side } else { lo[a] };
            if !hi {
                sign = -sign;
            }
            q = q * (shape[a] + 1) + i;
        }
        total += sign * table[q];
    }
    total
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Partial-regularity proxy. The grid is split into cells of `2^levels`
/// points per axis. Around every grid point the excess
/// `E(r) = mean_{Q_r} |D^m u - (D^m u)_{Q_r}|^2` is computed on cubes `Q_r`
/// of side `r = 2^j` points (`j = 1..=levels`, shifted inside the grid) and
/// the slope of `log E` against `log r` is fitted by least squares; a cell
/// reports the smallest slope among its points.
/// Derivatives are local finite differences so that jumps stay localized.
pub fn regularity_diagnostic<T: Real>(
    u: &GridField<T>,
    op: &DifferentialOperator<T>,
    config: &RegularityConfig,
) -> Result<RegularityReport> {
    if u.n() != op.n() || u.components() != op.dim_v() {
        return Err(Error::DimensionMismatch {
            context: "field layout vs operator",
            expected: op.dim_v(),
            found: u.components(),
        });
    }
    if config.levels < 2 {
        return Err(Error::InvalidArgument("at least two dyadic levels are needed for a fit".into()));
    }
    let block = 1usize << config.levels;
    if let Some(&s) = u.shape().iter().find(|&&s| s < block) {
        return Err(Error::GridTooSmall { needed: block, found: s });
    }
    let u = u.cast::<f64>();
    let shape = u.shape().to_vec();
    let n = shape.len();
    let pts = u.points();
    let periodic = u.domain == Domain::Torus;
    let alphas = multi_indices(n, op.order());
    let mut derivs: Vec<Vec<f64>> = Vec::new();
    for c in 0..u.components() {
        for alpha in &alphas {
            let mut v = u.component(c).to_vec();
            for (axis, &k) in alpha.0.iter().enumerate() {
                for _ in 0..k {
                    v = local_difference(&v, &shape, axis, periodic);
                }
            }
            derivs.push(v);
        }
    }
    let global: f64 = derivs.iter().flat_map(|d| d.iter()).map(|v| v * v).sum::<f64>() / pts as f64;
    // subtract channel means so that box sums do not cancel
    for d in derivs.iter_mut() {
        let mean = d.iter().sum::<f64>() / pts as f64;
        d.iter_mut().for_each(|v| *v -= mean);
    }
    let floor = 1e-12 * global.max(f64::MIN_POSITIVE);
    let squares: Vec<f64> = (0..pts).map(|p| derivs.iter().map(|d| d[p] * d[p]).sum()).collect();
    let tables: Vec<Vec<f64>> = derivs.iter().chain(std::iter::once(&squares)).map(|d| prefix_table(d, &shape)).collect();
    let (sq_table, sum_tables) = tables.split_last().expect("square table");
    let cells: Vec<usize> = shape.iter().map(|s| s / block).collect();
    let ncells: usize = cells.iter().product();
    let log_r: Vec<f64> = (1..=config.levels).map(|j| ((1usize << j) as f64).ln()).collect();
    let map: Vec<Option<f64>> = (0..ncells)
        .into_par_iter()
        .map(|cell| {
            let cidx = unravel(cell, &cells);
            let mut worst: Option<f64> = None;
            for k in 0..block.pow(n as u32) {
                let off = unravel(k, &vec![block; n]);
                let centre: Vec<usize> = (0..n).map(|a| cidx[a] * block + off[a]).collect();
                let mut logs = Vec::with_capacity(log_r.len());
                for j in 1..=config.levels {
                    let side = 1usize << j;
                    let lo: Vec<usize> = (0..n).map(|a| centre[a].saturating_sub(side / 2).min(shape[a] - side)).collect();
                    let count = side.pow(n as u32) as f64;
                    let sq = box_sum(sq_table, &shape, &lo, side) / count;
                    let mean_sq: f64 = sum_tables.iter().map(|t| (box_sum(t, &shape, &lo, side) / count).powi(2)).sum();
                    logs.push((sq - mean_sq).max(0.0));
                }
                if logs.iter().all(|e| *e <= floor) {
                    continue;
                }
                let ys: Vec<f64> = logs.iter().map(|e| e.max(floor).ln()).collect();
                let slope = fit_slope(&log_r, &ys);
                worst = Some(worst.map_or(slope, |w| w.min(slope)));
            }
            worst
        })
        .collect();
    let singular = map.iter().filter(|e| e.is_some_and(|v| v < config.threshold)).count();
    let mut finite: Vec<f64> = map.iter().flatten().copied().collect();
    finite.sort_by(|a, b| a.partial_cmp(b).expect("finite exponents"));
    let alpha = if finite.is_empty() {
        None
    } else if finite.len() % 2 == 1 {
        Some(finite[finite.len() / 2])
    } else {
        Some(0.5 * (finite[finite.len() / 2 - 1] + finite[finite.len() / 2]))
    };
    Ok(RegularityReport {
        cells,
        excess_map: map,
        singular_fraction: singular as f64 / ncells as f64,
        alpha_estimate: alpha,
        levels: config.levels,
        threshold: config.threshold,
    })
}
