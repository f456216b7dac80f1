//! Objects witnessing the failure of Korn-type inequalities for
//! non-elliptic first-order operators: symbol kernel directions, localized
//! plane waves `u_i(x) = rho(x) h_i(<x, xi'>) v`, and rough kernel fields.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Domain, GridField};
use crate::nfunctions::NFunction;
use crate::operators::{check_ellipticity, default_sphere_samples, DifferentialOperator};
use crate::quadrature;
use crate::scalar::Real;

/// Width of the smooth transitions of the cutoff's slope profile, as a
/// fraction of the descent interval.
const RAMP: f64 = 0.05;
const STEP_TABLE: usize = 4096;

fn bump_exp(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        (-1.0 / y).exp()
    }
}

/// Smooth step from 0 (y <= 0) to 1 (y >= 1).
fn smooth_step(y: f64) -> f64 {
    let (a, b) = (bump_exp(y), bump_exp(1.0 - y));
    if a + b == 0.0 {
        if y <= 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        a / (a + b)
    }
}

/// Cumulative integrals of the smooth step on a uniform grid over [0, 1].
fn step_integral_table() -> &'static Vec<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 1.0 / STEP_TABLE as f64;
        let mut out = Vec::with_capacity(STEP_TABLE + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for k in 0..STEP_TABLE {
            acc += quadrature::fixed(&smooth_step, k as f64 * h, (k + 1) as f64 * h);
            out.push(acc);
        }
        out
    })
}

/// `int_0^y S(s) ds` by cubic Hermite interpolation of the table.
fn step_integral(y: f64) -> f64 {
    let table = step_integral_table();
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return table[STEP_TABLE] + (y - 1.0);
    }
    let h = 1.0 / STEP_TABLE as f64;
    let k = ((y / h) as usize).min(STEP_TABLE - 1);
    let (x0, x1) = (k as f64 * h, (k + 1) as f64 * h);
    let s = (y - x0) / h;
    let (p0, p1) = (table[k], table[k + 1]);
    let (m0, m1) = (smooth_step(x0) * h, smooth_step(x1) * h);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
}

/// Radial cutoff: 1 on `r <= inner`, 0 on `r >= outer`, decreasing in
/// between with slope `-c g(x) / L`, `x = (r - inner) / L`, where `g` is a
/// smooth plateau (rising over the first `RAMP` fraction, falling over the
/// last) and `c = 1 / (1 - RAMP)` makes the total drop exactly one.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffProfile {
    pub inner: f64,
    pub outer: f64,
}

impl CutoffProfile {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(outer > inner && inner >= 0.0);
        Self { inner, outer }
    }

    fn length(&self) -> f64 {
        self.outer - self.inner
    }

    fn scale() -> f64 {
        1.0 / (1.0 - RAMP)
    }

    /// Integral of the plateau `g` over `[0, x]`.
    fn plateau_integral(x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let head = RAMP * step_integral(x.min(RAMP) / RAMP);
        let middle = (x.min(1.0 - RAMP) - RAMP).max(0.0);
        let tail = if x > 1.0 - RAMP {
            let top = RAMP * step_integral(1.0);
            top - RAMP * step_integral((1.0 - x) / RAMP)
        } else {
            0.0
        };
        head + middle + tail
    }

    fn plateau(x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else if x < RAMP {
            smooth_step(x / RAMP)
        } else if x > 1.0 - RAMP {
            smooth_step((1.0 - x) / RAMP)
        } else {
            1.0
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner {
            return 1.0;
        }
        if r >= self.outer {
            return 0.0;
        }
        let x = (r - self.inner) / self.length();
        (1.0 - Self::scale() * Self::plateau_integral(x)).max(0.0)
    }

    /// `d rho / dr`.
    pub fn derivative(&self, r: f64) -> f64 {
        let x = (r - self.inner) / self.length();
        -Self::scale() * Self::plateau(x) / self.length()
    }

    /// Largest `|d rho / dr|`.
    pub fn max_slope(&self) -> f64 {
        Self::scale() / self.length()
    }

    /// Radii where the profile changes form (for quadrature panels).
    pub fn breakpoints(&self) -> [f64; 4] {
        let l = self.length();
        [self.inner, self.inner + RAMP * l, self.outer - RAMP * l, self.outer]
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = crate::scalar::norm(x);
        if r <= self.inner || r >= self.outer {
            return vec![0.0; x.len()];
        }
        let d = self.derivative(r) / r;
        x.iter().map(|&xa| d * xa).collect()
    }
}

/// Unit frequency with nontrivial symbol kernel and a unit kernel vector,
/// or `None` for elliptic operators.
pub fn find_symbol_kernel<T: Real>(op: &DifferentialOperator<T>) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let report = check_ellipticity(op, default_sphere_samples(op.n()))?;
    Ok(report.witness_kernel_vector.map(|v| {
        (
            report.witness_xi.iter().map(|x| x.as_f64()).collect(),
            v.iter().map(|x| x.as_f64()).collect(),
        )
    }))
}

/// Everything needed to evaluate the plane-wave sequence.
#[derive(Clone, Debug, Serialize)]
pub struct PlaneWaveRecipe {
    pub n: usize,
    pub xi_prime: Vec<f64>,
    pub v: Vec<f64>,
    /// `|A[xi'] v|`.
    pub symbol_residual: f64,
    pub operator_norm: f64,
    /// Cutoff radius `R = 2 sqrt(n) (1 + 1 / (sqrt(n) min{1/|A|, 1}))`.
    pub radius: f64,
    pub rho: CutoffProfile,
    /// Growth exponent used for the scaling of `h_i`.
    pub p: f64,
    /// `gamma = (1 - 1/p) / 2`.
    pub gamma: f64,
    #[serde(skip)]
    coeffs: Vec<DMatrix<f64>>,
    /// Gram matrix of the vectors `A_j v`, row-major `n x n`.
    #[serde(skip)]
    gram: Vec<f64>,
}

/// `g(t) = exp(-1/(1-t^2))` on `(-1, 1)`.
pub fn standard_bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

pub fn standard_bump_derivative(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - t * t;
        standard_bump(t) * (-2.0 * t / (d * d))
    }
}

/// Builds the plane-wave recipe for a non-elliptic first-order operator.
pub fn plane_wave_recipe<T: Real>(op: &DifferentialOperator<T>, p: f64) -> Result<PlaneWaveRecipe> {
    if op.order() != 1 {
        return Err(Error::Unsupported("plane-wave counterexamples need a first-order operator".into()));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("growth exponent must exceed 1, got {p}")));
    }
    let op64: DifferentialOperator<f64> = op.cast();
    let (xi_prime, v) = find_symbol_kernel(&op64)?.ok_or(Error::EllipticOperator)?;
    let n = op.n();
    let norm = op64.operator_norm();
    let mu = if norm > 0.0 { (1.0 / norm).min(1.0) } else { 1.0 };
    let sn = (n as f64).sqrt();
    let radius = 2.0 * sn * (1.0 + 1.0 / (sn * mu));
    let residual = op64.pure_tensor(&v, &xi_prime)?.norm();
    let coeffs = (0..n)
        .map(|j| {
            op64.coefficient(&crate::MultiIndex::unit(n, j))
                .cloned()
                .unwrap_or_else(|| DMatrix::zeros(op.dim_w(), op.dim_v()))
        })
        .collect::<Vec<DMatrix<f64>>>();
    let vv = DVector::from_column_slice(&v);
    let images: Vec<DVector<f64>> = coeffs.iter().map(|m| m * &vv).collect();
    let gram = (0..n * n).map(|k| images[k / n].dot(&images[k % n])).collect();
    Ok(PlaneWaveRecipe {
        n,
        xi_prime,
        v,
        symbol_residual: residual,
        operator_norm: norm,
        radius,
        rho: CutoffProfile::new(sn, radius),
        p,
        gamma: (1.0 - 1.0 / p) / 2.0,
        coeffs,
        gram,
    })
}

impl PlaneWaveRecipe {
    fn check_index(i: usize) -> Result<()> {
        if i < 1 {
            return Err(Error::IndexOutOfRange(i));
        }
        Ok(())
    }

    /// `h_i(t) = i^{-gamma} g(i t)`.
    pub fn h(&self, i: usize, t: f64) -> f64 {
        (i as f64).powf(-self.gamma) * standard_bump(i as f64 * t)
    }

    pub fn h_prime(&self, i: usize, t: f64) -> f64 {
        (i as f64).powf(1.0 - self.gamma) * standard_bump_derivative(i as f64 * t)
    }

    /// `A[y] v`.
    fn symbol_apply(&self, y: &[f64]) -> DVector<f64> {
        let v = DVector::from_column_slice(&self.v);
        let mut out = DVector::zeros(self.coeffs[0].nrows());
        for (m, &yj) in self.coeffs.iter().zip(y) {
            if yj != 0.0 {
                out += m * &v * yj;
            }
        }
        out
    }

    pub fn u(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let t = crate::scalar::dot(x, &self.xi_prime);
        let s = self.rho.value(crate::scalar::norm(x)) * self.h(i, t);
        self.v.iter().map(|vk| s * vk).collect()
    }

    /// `A u_i = rho h_i' A[xi'] v + h_i A[grad rho] v`.
    pub fn au(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let t = crate::scalar::dot(x, &self.xi_prime);
        let r = crate::scalar::norm(x);
        let grad = self.rho.gradient(x);
        let mut out = self.symbol_apply(&grad) * self.h(i, t);
        let along = self.rho.value(r) * self.h_prime(i, t);
        if along != 0.0 {
            out += self.symbol_apply(&self.xi_prime) * along;
        }
        out.iter().copied().collect()
    }

    /// `D u_i = rho h_i' v (x) xi' + h_i v (x) grad rho`, row-major `N x n`.
    pub fn du(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let t = crate::scalar::dot(x, &self.xi_prime);
        let r = crate::scalar::norm(x);
        let grad = self.rho.gradient(x);
        let a = self.rho.value(r) * self.h_prime(i, t);
        let b = self.h(i, t);
        let mut out = Vec::with_capacity(self.v.len() * self.n);
        for &vk in &self.v {
            for j in 0..self.n {
                out.push(vk * (a * self.xi_prime[j] + b * grad[j]));
            }
        }
        out
    }

    /// `(|D u_i(x)|, |A u_i(x)|)` without allocating.
    fn pointwise_norms(&self, i: usize, x: &[f64]) -> (f64, f64) {
        let n = self.n;
        let t = crate::scalar::dot(x, &self.xi_prime);
        let b = self.h(i, t);
        if b == 0.0 {
            return (0.0, 0.0);
        }
        let r = crate::scalar::norm(x);
        let a = self.rho.value(r) * self.h_prime(i, t);
        let d = if r <= self.rho.inner || r >= self.rho.outer { 0.0 } else { self.rho.derivative(r) / r };
        // coefficient vector c with D u = v (x) c and A u = sum_j c_j A_j v
        let mut c = [0.0; 3];
        for j in 0..n {
            c[j] = a * self.xi_prime[j] + b * d * x[j];
        }
        let c = &c[..n];
        let vnorm = crate::scalar::norm(&self.v);
        let du = vnorm * crate::scalar::norm(c);
        let mut q = 0.0;
        for j in 0..n {
            for k in 0..n {
                q += c[j] * self.gram[j * n + k] * c[k];
            }
        }
        (du, q.max(0.0).sqrt())
    }

    /// Orthonormal basis of the hyperplane orthogonal to `xi'`.
    fn transverse_basis(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut w = e.clone();
            let c = crate::scalar::dot(&e, &self.xi_prime);
            for a in 0..n {
                w[a] -= c * self.xi_prime[a];
            }
            for b in &basis {
                let c = crate::scalar::dot(&w, b);
                for a in 0..n {
                    w[a] -= c * b[a];
                }
            }
            let nw = crate::scalar::norm(&w);
            if nw > 1e-8 {
                basis.push(w.iter().map(|x| x / nw).collect());
            }
            if basis.len() == n - 1 {
                break;
            }
        }
        basis
    }

    /// `int f(x) dx` over the support of `u_i` (the slab `|<x, xi'>| < 1/i`
    /// inside the ball of radius R), in coordinates `x = t xi' + s omega`
    /// with `omega` on the unit sphere of the transverse hyperplane.
    fn integrate_support(&self, i: usize, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
        let n = self.n;
        let transverse = self.transverse_basis();
        let directions: Vec<(Vec<f64>, f64)> = match n {
            2 => vec![(transverse[0].clone(), 1.0), (transverse[0].iter().map(|x| -x).collect(), 1.0)],
            3 => {
                let k = 32;
                (0..k)
                    .map(|j| {
                        let phi = std::f64::consts::TAU * j as f64 / k as f64;
                        let w: Vec<f64> = (0..3)
                            .map(|a| phi.cos() * transverse[0][a] + phi.sin() * transverse[1][a])
                            .collect();
                        (w, std::f64::consts::TAU / k as f64)
                    })
                    .collect()
            }
            _ => return Err(Error::Unsupported("plane-wave quadrature is implemented for n = 2, 3".into())),
        };
        let half = 1.0 / i as f64;
        let t_panels = 8;
        let t_nodes: Vec<(f64, f64)> = panel_nodes(&[-half, half], t_panels);
        let r_out = self.radius;
        let total: f64 = t_nodes
            .par_iter()
            .map(|&(t, wt)| {
                let smax = (r_out * r_out - t * t).max(0.0).sqrt();
                let mut cuts: Vec<f64> = vec![0.0];
                for b in self.rho.breakpoints() {
                    let s2 = b * b - t * t;
                    if s2 > 0.0 && s2.sqrt() < smax {
                        cuts.push(s2.sqrt());
                    }
                }
                cuts.push(smax);
                cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                cuts.dedup();
                let s_nodes = panel_nodes(&cuts, 4);
                let mut acc = 0.0;
                let mut x = vec![0.0; n];
                for &(s, ws) in &s_nodes {
                    let jac = if n == 3 { s } else { 1.0 };
                    for (w, wd) in &directions {
                        for a in 0..n {
                            x[a] = t * self.xi_prime[a] + s * w[a];
                        }
                        acc += ws * wd * jac * f(&x);
                    }
                }
                acc * wt
            })
            .sum();
        Ok(total)
    }
}

/// Composite 15-point Gauss-Legendre nodes over consecutive intervals given
/// by `cuts`, each split into `panels` pieces.
fn panel_nodes(cuts: &[f64], panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = quadrature::gauss_legendre(15);
    let mut out = Vec::new();
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (mid, rad) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (xi, wi) in x.iter().zip(&w) {
                out.push((mid + rad * xi, rad * wi));
            }
        }
    }
    out
}

/// Samples `u_i` on a box grid over `[-R, R]^n` (zero-extended outside).
/// Grid coordinate `X in [0,1)` maps to `x = -R + 2 R X`.
pub fn build_plane_wave_sequence(recipe: &PlaneWaveRecipe, i: usize, points_per_axis: usize) -> Result<GridField<f64>> {
    PlaneWaveRecipe::check_index(i)?;
    let r = recipe.radius;
    let mut field = GridField::from_fn(vec![points_per_axis; recipe.n], recipe.v.len(), |x, out| {
        let phys: Vec<f64> = x.iter().map(|&xa| -r + 2.0 * r * xa).collect();
        out.copy_from_slice(&recipe.u(i, &phys));
    })?;
    field.domain = Domain::ZeroExtendedBox;
    Ok(field)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRow {
    pub i: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `lhs_i = int psi(|D u_i|)` and `rhs_i = int psi(|A u_i|)` for
/// `i = 1..=i_max`, using the analytic derivative formulas and quadrature
/// adapted to the slab supporting `u_i`.
pub fn korn_failure_experiment<T: Real>(
    op: &DifferentialOperator<T>,
    psi: &NFunction,
    i_max: usize,
) -> Result<Vec<ExperimentRow>> {
    PlaneWaveRecipe::check_index(i_max)?;
    let recipe = plane_wave_recipe(op, psi.exponent())?;
    (1..=i_max)
        .map(|i| {
            let lhs = recipe.integrate_support(i, &|x| psi.value(recipe.pointwise_norms(i, x).0))?;
            let rhs = recipe.integrate_support(i, &|x| psi.value(recipe.pointwise_norms(i, x).1))?;
            Ok(ExperimentRow { i, lhs, rhs, ratio: lhs / rhs })
        })
        .collect()
}

/// Tab-separated table with a header line.
pub fn experiment_tsv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from("# i\tlhs\trhs\tratio\n");
    for r in rows {
        out.push_str(&format!("{}\t{:.12e}\t{:.12e}\t{:.12e}\n", r.i, r.lhs, r.rhs, r.ratio));
    }
    out
}

/// Profiles `h` for kernel fields `x -> h(<x, xi'>) v`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RoughProfile {
    /// Heaviside step at `at`.
    Step { at: f64 },
    /// `sum_{l=1}^{levels} 4^{-l} sum_{q} H(t - q)` over odd multiples `q`
    /// of `2^{-l}` in `(-1, 1)`: bounded, increasing, with a jump at every
    /// dyadic rational of depth up to `levels`.
    DyadicJumps { levels: u32 },
}

impl Default for RoughProfile {
    fn default() -> Self {
        RoughProfile::DyadicJumps { levels: 12 }
    }
}

impl RoughProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            RoughProfile::Step { at } => {
                if t >= at {
                    1.0
                } else {
                    0.0
                }
            }
            RoughProfile::DyadicJumps { levels } => {
                let mut sum = 0.0;
                for l in 1..=levels {
                    let scale = (1u64 << l) as f64;
                    // count odd k with -scale < k <= t * scale
                    let hi = (t.min(1.0) * scale).floor() as i64;
                    let lo = -(scale as i64) + 1;
                    if hi < lo {
                        continue;
                    }
                    let odd_upto = |m: i64| -> i64 { (m + 1).div_euclid(2) };
                    let count = odd_upto(hi) - odd_upto(lo - 1);
                    sum += count as f64 * 0.25f64.powi(l as i32);
                }
                sum
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelField {
    pub xi_prime: Vec<f64>,
    pub v: Vec<f64>,
    /// `|A[xi'] v|`; the analytic image `h'(<x, xi'>) A[xi'] v` vanishes up to this.
    pub symbol_residual: f64,
    #[serde(skip)]
    pub field: GridField<f64>,
}

/// Samples `h(<x, xi'>) v` on the periodic grid over `[0,1)^n`, shifted so
/// the profile is centred at `x = (1/2, ..., 1/2)`.
pub fn nonsmooth_kernel_field<T: Real>(
    op: &DifferentialOperator<T>,
    profile: &RoughProfile,
    shape: &[usize],
) -> Result<KernelField> {
    if shape.len() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "grid dimension vs operator dimension",
            expected: op.n(),
            found: shape.len(),
        });
    }
    let op64: DifferentialOperator<f64> = op.cast();
    let (xi, v) = find_symbol_kernel(&op64)?.ok_or(Error::EllipticOperator)?;
    let residual = op64.pure_tensor(&v, &xi)?.norm();
    let field = GridField::from_fn(shape.to_vec(), v.len(), |x, out| {
        let t: f64 = x.iter().zip(&xi).map(|(xa, ka)| (xa - 0.5) * ka).sum();
        let h = profile.value(t);
        for (o, vk) in out.iter_mut().zip(&v) {
            *o = h * vk;
        }
    })?;
    Ok(KernelField { xi_prime: xi, v, symbol_residual: residual, field })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::*;

    #[test]
    fn step_integral_is_consistent() {
        assert!((step_integral(1.0) - 0.5).abs() < 1e-12);
        for y in [0.1, 0.33, 0.77] {
            let direct = quadrature::adaptive(&smooth_step, 0.0, y, 1e-13);
            assert!((step_integral(y) - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn cutoff_profile_properties() {
        let rho = CutoffProfile::new(2f64.sqrt(), 10.0);
        assert_eq!(rho.value(1.0), 1.0);
        assert!(rho.value(10.0 - 1e-9).abs() < 1e-9);
        assert!((rho.value(9.99999) - 0.0).abs() < 1e-6);
        let mut prev = 1.0;
        for k in 0..2000 {
            let r = 1.4 + 8.7 * k as f64 / 2000.0;
            let v = rho.value(r);
            assert!(v <= prev + 1e-14);
            prev = v;
            assert!(rho.derivative(r).abs() <= rho.max_slope() * (1.0 + 1e-12));
        }
        // derivative agrees with finite differences
        for r in [1.6, 3.0, 9.7] {
            let h = 1e-6;
            let fd = (rho.value(r + h) - rho.value(r - h)) / (2.0 * h);
            assert!((fd - rho.derivative(r)).abs() < 1e-6);
        }
    }

    #[test]
    fn recipe_for_partial_derivative() {
        let r = plane_wave_recipe(&partial::<f64>(2, 0), 2.0).unwrap();
        assert_eq!(r.xi_prime, vec![0.0, 1.0]);
        assert_eq!(r.v, vec![1.0]);
        let sn = 2f64.sqrt();
        assert!((r.radius - 2.0 * sn * (1.0 + 1.0 / sn)).abs() < 1e-12);
        assert!(r.rho.max_slope() <= 1.0 / r.operator_norm.max(1.0) + 1e-12);
        assert!((r.gamma - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fast_norms_match_field_evaluators() {
        let r = plane_wave_recipe(&curl::<f64>(3), 2.0).unwrap();
        for (k, x) in [[0.3, -0.01, 2.0], [1.5, 0.02, -2.9], [-3.1, 0.1, 0.4]].iter().enumerate() {
            let i = k + 1;
            let (du, au) = r.pointwise_norms(i, x);
            assert!((du - crate::scalar::norm(&r.du(i, x))).abs() < 1e-12);
            assert!((au - crate::scalar::norm(&r.au(i, x))).abs() < 1e-12);
        }
    }

    // L1 distance between centered differences of u_i and the closed form
    // for A u_i, on a cell-centered grid with N points per axis.
    fn product_rule_l1_error(r: &PlaneWaveRecipe, i: usize, n_pts: usize) -> f64 {
        let h = 2.0 * r.radius / n_pts as f64;
        let mut err = 0.0;
        for k0 in 0..n_pts {
            for k1 in 0..n_pts {
                let x = [-r.radius + h * (k0 as f64 + 0.5), -r.radius + h * (k1 as f64 + 0.5)];
                let mut fd = vec![0.0; r.coeffs[0].nrows()];
                for j in 0..2 {
                    let (mut xp, mut xm) = (x, x);
                    xp[j] += h;
                    xm[j] -= h;
                    let (up, um) = (r.u(i, &xp), r.u(i, &xm));
                    let diff: Vec<f64> = up.iter().zip(&um).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                    let img = &r.coeffs[j] * DVector::from_vec(diff);
                    for (f, g) in fd.iter_mut().zip(img.iter()) {
                        *f += g;
                    }
                }
                let exact = r.au(i, &x);
                err += fd.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() * h * h;
            }
        }
        err
    }

    #[test]
    fn product_rule_converges_at_second_order() {
        let r = plane_wave_recipe(&partial::<f64>(2, 0), 2.0).unwrap();
        let errs: Vec<f64> = [256, 512, 1024].iter().map(|&m| product_rule_l1_error(&r, 2, m)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "order {order} from {errs:?}");
        }
    }

    #[test]
    fn elliptic_operator_is_rejected() {
        let err = plane_wave_recipe(&symmetric_gradient::<f64>(2), 2.0).unwrap_err();
        assert!(matches!(err, Error::EllipticOperator));
        assert!(find_symbol_kernel(&symmetric_gradient::<f64>(2)).unwrap().is_none());
        assert!(matches!(
            nonsmooth_kernel_field(&div_curl::<f64>(), &RoughProfile::default(), &[8, 8, 8]),
            Err(Error::EllipticOperator)
        ));
    }

    #[test]
    fn h_family_scaling() {
        // int h_i^2 = i^{-2 gamma - 1} int g^2 by change of variables.
        let r = plane_wave_recipe(&partial::<f64>(2, 0), 2.0).unwrap();
        let g2 = quadrature::adaptive(&|t: f64| standard_bump(t).powi(2), -1.0, 1.0, 1e-13);
        let gp2 = quadrature::adaptive(&|t: f64| standard_bump_derivative(t).powi(2), -1.0, 1.0, 1e-13);
        for i in [1usize, 3, 7] {
            let b = 1.0 / i as f64;
            let hi = quadrature::adaptive(&|t: f64| r.h(i, t).powi(2), -b, b, 1e-13);
            assert!((hi - (i as f64).powf(-1.5) * g2).abs() < 1e-10 * g2);
            let hpi = quadrature::adaptive(&|t: f64| r.h_prime(i, t).powi(2), -b, b, 1e-13);
            assert!((hpi - (i as f64).powf(0.5) * gp2).abs() < 1e-9 * gp2);
        }
        assert_eq!(r.h(4, 0.25), 0.0);
    }

    #[test]
    fn index_zero_is_rejected() {
        let r = plane_wave_recipe(&partial::<f64>(2, 0), 2.0).unwrap();
        assert!(matches!(build_plane_wave_sequence(&r, 0, 16), Err(Error::IndexOutOfRange(0))));
    }

    #[test]
    fn rough_profiles() {
        let s = RoughProfile::Step { at: 0.0 };
        assert_eq!(s.value(-0.1), 0.0);
        assert_eq!(s.value(0.1), 1.0);
        let d = RoughProfile::DyadicJumps { levels: 3 };
        // level 1 jumps by 1/4 at +-1/2
        assert!((d.value(0.5) - d.value(0.5 - 1e-9) - 0.25).abs() < 1e-12);
        assert!((d.value(-0.5) - d.value(-0.5 - 1e-9) - 0.25).abs() < 1e-12);
        // level 2 jumps by 1/16 at +-1/4 and +-3/4
        assert!((d.value(0.25) - d.value(0.25 - 1e-9) - 1.0 / 16.0).abs() < 1e-12);
        assert!((d.value(-0.75) - d.value(-0.75 - 1e-9) - 1.0 / 16.0).abs() < 1e-12);
        assert!((d.value(1e-9) - d.value(-1e-9)).abs() < 1e-12);
        assert!(d.value(-1.0) == 0.0);
    }

    #[test]
    fn step_kernel_field_of_partial_derivative() {
        let k = nonsmooth_kernel_field(&partial::<f64>(2, 0), &RoughProfile::Step { at: 0.0 }, &[16, 16]).unwrap();
        // constant in x_1
        let f = &k.field;
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(f.component(0)[f.ravel(&[i, j])], f.component(0)[f.ravel(&[0, j])]);
            }
        }
        assert_eq!(k.symbol_residual, 0.0);
    }
}
