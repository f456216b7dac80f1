use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrand::{check_integrand_dim, Integrand, ReducedIntegrand};
use super::lbfgs::{lbfgs, LbfgsConfig};
use super::tree_sum;
use crate::error::{Error, Result};
use crate::field::{Domain, GridField};
use crate::linalg::MultiIndex;
use crate::operators::DifferentialOperator;
use crate::rng;
use crate::scalar::Real;
use crate::spectral;

/// How the unknown field is constrained.
#[derive(Clone, Debug)]
pub enum Boundary {
    /// Periodic fields on the unit torus; the energy density sees
    /// `mean_strain + A u` with a constant `mean_strain` in `W`.
    Periodic { mean_strain: Vec<f64> },
    /// The closed box `[0,1]^n` sampled at vertices `i / (S - 1)`; the
    /// outermost layer of vertices is frozen to the datum.
    Dirichlet { datum: GridField<f64> },
}

/// `int F(x, u, A u) dx` discretized on a grid.
///
/// On the torus `A` is applied spectrally (any order). On the box, first-order
/// operators use centered differences inside and one-sided differences on
/// the boundary layer, paired with trapezoidal weights so that summation by
/// parts holds exactly: `sum_k w_k (D phi)_k = 0` whenever `phi` vanishes on
/// the boundary layer. In particular affine data are exact discrete critical
/// points of autonomous energies.
#[derive(Clone, Debug)]
pub struct EnergyProblem {
    pub op: DifferentialOperator<f64>,
    pub integrand: Arc<dyn Integrand>,
    pub boundary: Boundary,
    shape: Vec<usize>,
    weights: Vec<f64>,
    free: Vec<bool>,
    /// Formal adjoint `(-1)^m sum A_alpha^T d^alpha` (periodic case).
    adjoint: Option<DifferentialOperator<f64>>,
    /// `A_j` for `A = sum_j A_j d_j` (box case).
    first_order: Vec<DMatrix<f64>>,
}

impl EnergyProblem {
    pub fn periodic<T: Real>(
        op: &DifferentialOperator<T>,
        integrand: Arc<dyn Integrand>,
        shape: &[usize],
        mean_strain: Option<Vec<f64>>,
    ) -> Result<Self> {
        let op = op.cast::<f64>();
        check_integrand_dim(integrand.as_ref(), op.dim_w())?;
        check_shape(&op, shape)?;
        let mean_strain = mean_strain.unwrap_or_else(|| vec![0.0; op.dim_w()]);
        if mean_strain.len() != op.dim_w() {
            return Err(Error::DimensionMismatch {
                context: "mean strain vs dim W",
                expected: op.dim_w(),
                found: mean_strain.len(),
            });
        }
        let pts: usize = shape.iter().product();
        let vol = 1.0 / pts as f64;
        let sign = if op.order().is_multiple_of(2) { 1.0 } else { -1.0 };
        let coeffs: Vec<(MultiIndex, DMatrix<f64>)> =
            op.coefficients().map(|(a, m)| (a.clone(), m.transpose() * sign)).collect();
        let adjoint = DifferentialOperator::new(
            Some(format!("{}*", op.label())),
            op.n(),
            op.dim_w(),
            op.dim_v(),
            op.order(),
            coeffs,
        )?;
        Ok(Self {
            op,
            integrand,
            boundary: Boundary::Periodic { mean_strain },
            shape: shape.to_vec(),
            weights: vec![vol; pts],
            free: vec![true; pts],
            adjoint: Some(adjoint),
            first_order: Vec::new(),
        })
    }

    pub fn dirichlet<T: Real>(
        op: &DifferentialOperator<T>,
        integrand: Arc<dyn Integrand>,
        datum: &GridField<T>,
    ) -> Result<Self> {
        let op = op.cast::<f64>();
        check_integrand_dim(integrand.as_ref(), op.dim_w())?;
        if op.order() != 1 {
            return Err(Error::Unsupported(format!(
                "Dirichlet problems are discretized for first-order operators, got order {}",
                op.order()
            )));
        }
        check_shape(&op, datum.shape())?;
        if datum.components() != op.dim_v() {
            return Err(Error::DimensionMismatch {
                context: "datum components vs dim V",
                expected: op.dim_v(),
                found: datum.components(),
            });
        }
        if let Some(&s) = datum.shape().iter().find(|&&s| s < 4) {
            return Err(Error::GridTooSmall { needed: 4, found: s });
        }
        let shape = datum.shape().to_vec();
        let n = op.n();
        let pts: usize = shape.iter().product();
        let mut weights = vec![0.0; pts];
        let mut free = vec![false; pts];
        let mut idx = vec![0usize; n];
        for p in 0..pts {
            unravel(&shape, p, &mut idx);
            let mut w = 1.0;
            let mut interior = true;
            for (a, &k) in idx.iter().enumerate() {
                let s = shape[a];
                let h = 1.0 / (s - 1) as f64;
                let boundary = k == 0 || k == s - 1;
                w *= if boundary { 0.5 * h } else { h };
                interior &= !boundary;
            }
            weights[p] = w;
            free[p] = interior;
        }
        let first_order = (0..n)
            .map(|j| {
                op.coefficient(&MultiIndex::unit(n, j))
                    .cloned()
                    .unwrap_or_else(|| DMatrix::zeros(op.dim_w(), op.dim_v()))
            })
            .collect();
        let mut datum = datum.cast::<f64>();
        datum.domain = Domain::ClosedBox;
        datum.mean_zero = false;
        let problem = Self {
            op,
            integrand,
            boundary: Boundary::Dirichlet { datum },
            shape,
            weights,
            free,
            adjoint: None,
            first_order,
        };
        let e = problem.energy(&problem.initial_field())?;
        if !e.is_finite() {
            return Err(Error::NonFiniteEnergy);
        }
        Ok(problem)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self.boundary, Boundary::Dirichlet { .. })
    }

    /// Quadrature weight of each grid point.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Whether each grid point is a free unknown.
    pub fn free_points(&self) -> &[bool] {
        &self.free
    }

    pub fn domain(&self) -> Domain {
        if self.is_dirichlet() {
            Domain::ClosedBox
        } else {
            Domain::Torus
        }
    }

    pub fn coordinate_into(&self, p: usize, x: &mut [f64]) {
        let mut q = p;
        let denom_shift = usize::from(self.is_dirichlet());
        for a in (0..self.shape.len()).rev() {
            let s = self.shape[a];
            x[a] = (q % s) as f64 / (s - denom_shift) as f64;
            q /= s;
        }
    }

    /// Starting field: the datum on the box, zero on the torus.
    pub fn initial_field(&self) -> GridField<f64> {
        match &self.boundary {
            Boundary::Dirichlet { datum } => datum.clone(),
            Boundary::Periodic { .. } => {
                GridField::zeros(self.shape.clone(), self.op.dim_v()).expect("shape validated")
            }
        }
    }

    fn check_field(&self, u: &GridField<f64>) -> Result<()> {
        if u.shape() != self.shape.as_slice() || u.components() != self.op.dim_v() {
            return Err(Error::DimensionMismatch {
                context: "field layout vs problem",
                expected: self.shape.iter().product::<usize>() * self.op.dim_v(),
                found: u.values().len(),
            });
        }
        Ok(())
    }

    /// The discrete `A u` (plus the mean strain on the torus).
    pub fn image(&self, u: &GridField<f64>) -> Result<GridField<f64>> {
        self.check_field(u)?;
        match &self.boundary {
            Boundary::Periodic { mean_strain } => {
                let mut a = spectral::apply_operator(&self.op, u)?;
                let pts = a.points();
                for (c, m) in mean_strain.iter().enumerate() {
                    if *m != 0.0 {
                        a.values_mut()[c * pts..(c + 1) * pts].iter_mut().for_each(|v| *v += m);
                    }
                }
                Ok(a)
            }
            Boundary::Dirichlet { .. } => {
                let pts = u.points();
                let (l, big_n) = (self.op.dim_w(), self.op.dim_v());
                let mut out = vec![0.0; l * pts];
                let mut d = vec![0.0; pts];
                for (j, b) in self.first_order.iter().enumerate() {
                    for c in 0..big_n {
                        if b.column(c).iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        diff_axis(u.component(c), &self.shape, j, &mut d);
                        for r in 0..l {
                            let coef = b[(r, c)];
                            if coef != 0.0 {
                                out[r * pts..(r + 1) * pts].iter_mut().zip(&d).for_each(|(o, v)| *o += coef * v);
                            }
                        }
                    }
                }
                let mut f = GridField::new(self.shape.clone(), l, out)?;
                f.domain = Domain::ClosedBox;
                Ok(f)
            }
        }
    }

    fn point_args(&self, u: &GridField<f64>, a: &GridField<f64>, p: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; self.shape.len()];
        self.coordinate_into(p, &mut x);
        let pts = u.points();
        let y = (0..u.components()).map(|c| u.values()[c * pts + p]).collect();
        let z = (0..a.components()).map(|c| a.values()[c * pts + p]).collect();
        (x, y, z)
    }

    pub fn energy(&self, u: &GridField<f64>) -> Result<f64> {
        let a = self.image(u)?;
        Ok(tree_sum(u.points(), |p| {
            let (x, y, z) = self.point_args(u, &a, p);
            self.weights[p] * self.integrand.value(&x, &y, &z)
        }))
    }

    /// `D^m u` with component `c * #alpha + a` holding `d^{alpha_a} u_c`:
    /// spectral on the torus, the same differences as [`Self::image`] on
    /// the box.
    pub fn derivatives(&self, u: &GridField<f64>) -> Result<GridField<f64>> {
        self.check_field(u)?;
        match &self.boundary {
            Boundary::Periodic { .. } => Ok(spectral::derivatives(u, self.op.order())),
            Boundary::Dirichlet { .. } => {
                let (n, pts) = (self.shape.len(), u.points());
                let mut out = vec![0.0; u.components() * n * pts];
                for c in 0..u.components() {
                    for j in 0..n {
                        let k = c * n + j;
                        diff_axis(u.component(c), &self.shape, j, &mut out[k * pts..(k + 1) * pts]);
                    }
                }
                let mut f = GridField::new(self.shape.clone(), u.components() * n, out)?;
                f.domain = Domain::ClosedBox;
                Ok(f)
            }
        }
    }

    /// `int G(x, u, D^m u) dx` for the full-gradient integrand `G = F o M`.
    /// A periodic mean strain `z0` enters as the derivative-space offset
    /// `Z0` with `M Z0 = z0`.
    pub fn reduced_energy(&self, g: &ReducedIntegrand, u: &GridField<f64>) -> Result<f64> {
        let du = self.derivatives(u)?;
        let k = du.components();
        if g.map.ncols() != k || g.map.nrows() != self.op.dim_w() {
            return Err(Error::DimensionMismatch { context: "reduced integrand vs derivative space", expected: k, found: g.map.ncols() });
        }
        let offset = match &self.boundary {
            Boundary::Periodic { mean_strain } if mean_strain.iter().any(|v| *v != 0.0) => {
                let z0 = DVector::from_column_slice(mean_strain);
                let big_z = g
                    .map
                    .clone()
                    .svd(true, true)
                    .solve(&z0, 1e-12)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                if (&g.map * &big_z - &z0).norm() > 1e-10 * (1.0 + z0.norm()) {
                    return Err(Error::InvalidArgument("mean strain lies outside the range of the operator".into()));
                }
                big_z.as_slice().to_vec()
            }
            _ => vec![0.0; k],
        };
        Ok(tree_sum(u.points(), |p| {
            let (x, y, mut z) = self.point_args(u, &du, p);
            z.iter_mut().zip(&offset).for_each(|(a, b)| *a += b);
            self.weights[p] * g.value(&x, &y, &z)
        }))
    }

    /// Energy and its gradient with respect to the grid values; the
    /// gradient vanishes on frozen points.
    pub fn energy_and_gradient(&self, u: &GridField<f64>) -> Result<(f64, GridField<f64>)> {
        let a = self.image(u)?;
        let pts = u.points();
        let (l, big_n) = (self.op.dim_w(), self.op.dim_v());
        let energy = tree_sum(pts, |p| {
            let (x, y, z) = self.point_args(u, &a, p);
            self.weights[p] * self.integrand.value(&x, &y, &z)
        });
        let with_y = self.integrand.depends_on_y();
        // point-major weighted D_z F and D_y F
        let mut gz = vec![0.0; pts * l];
        let mut gy = vec![0.0; if with_y { pts * big_n } else { 0 }];
        gz.par_chunks_mut(l).enumerate().for_each(|(p, out)| {
            let (x, y, z) = self.point_args(u, &a, p);
            self.integrand.gradient(&x, &y, &z, out);
            out.iter_mut().for_each(|v| *v *= self.weights[p]);
        });
        if with_y {
            gy.par_chunks_mut(big_n).enumerate().for_each(|(p, out)| {
                let (x, y, z) = self.point_args(u, &a, p);
                self.integrand.gradient_y(&x, &y, &z, out);
                out.iter_mut().for_each(|v| *v *= self.weights[p]);
            });
        }
        let mut g_field = vec![0.0; l * pts];
        for p in 0..pts {
            for r in 0..l {
                g_field[r * pts + p] = gz[p * l + r];
            }
        }
        let mut grad = match &self.boundary {
            Boundary::Periodic { .. } => {
                let g = GridField::new(self.shape.clone(), l, g_field)?;
                let adj = self.adjoint.as_ref().expect("periodic problems carry the adjoint");
                spectral::apply_operator(adj, &g)?.into_values()
            }
            Boundary::Dirichlet { .. } => {
                let mut out = vec![0.0; big_n * pts];
                let mut tmp = vec![0.0; pts];
                for (j, b) in self.first_order.iter().enumerate() {
                    for c in 0..big_n {
                        if b.column(c).iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        tmp.iter_mut().for_each(|v| *v = 0.0);
                        for r in 0..l {
                            let coef = b[(r, c)];
                            if coef != 0.0 {
                                tmp.iter_mut()
                                    .zip(&g_field[r * pts..(r + 1) * pts])
                                    .for_each(|(t, g)| *t += coef * g);
                            }
                        }
                        diff_axis_adjoint(&tmp, &self.shape, j, &mut out[c * pts..(c + 1) * pts]);
                    }
                }
                out
            }
        };
        if with_y {
            for p in 0..pts {
                for c in 0..big_n {
                    grad[c * pts + p] += gy[p * big_n + c];
                }
            }
        }
        for p in 0..pts {
            if !self.free[p] {
                for c in 0..big_n {
                    grad[c * pts + p] = 0.0;
                }
            }
        }
        let mut gf = GridField::new(self.shape.clone(), big_n, grad)?;
        gf.domain = self.domain();
        Ok((energy, gf))
    }

    /// Largest gradient entry per unit quadrature weight over free points.
    pub fn gradient_sup(&self, grad: &[f64]) -> f64 {
        let pts = self.weights.len();
        grad.iter()
            .enumerate()
            .filter(|(k, _)| self.free[k % pts])
            .map(|(k, g)| (g / self.weights[k % pts]).abs())
            .fold(0.0, f64::max)
    }

    /// Copies the free entries of `x` into `u`.
    fn scatter(&self, x: &[f64], base: &GridField<f64>) -> GridField<f64> {
        let mut u = base.clone();
        let pts = u.points();
        let mut k = 0;
        for c in 0..u.components() {
            for p in 0..pts {
                if self.free[p] {
                    u.values_mut()[c * pts + p] = x[k];
                    k += 1;
                }
            }
        }
        u
    }

    fn gather(&self, u: &GridField<f64>) -> Vec<f64> {
        let pts = u.points();
        let mut out = Vec::new();
        for c in 0..u.components() {
            for p in 0..pts {
                if self.free[p] {
                    out.push(u.values()[c * pts + p]);
                }
            }
        }
        out
    }
}

fn check_shape(op: &DifferentialOperator<f64>, shape: &[usize]) -> Result<()> {
    if shape.len() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "grid dimension vs operator dimension",
            expected: op.n(),
            found: shape.len(),
        });
    }
    GridField::<f64>::zeros(shape.to_vec(), 1).map(|_| ())
}

fn unravel(shape: &[usize], mut p: usize, idx: &mut [usize]) {
    for a in (0..shape.len()).rev() {
        idx[a] = p % shape[a];
        p /= shape[a];
    }
}

/// `D_axis` on vertex samples of `[0,1]^n`: centered inside, one-sided on
/// the two boundary layers.
fn diff_axis(src: &[f64], shape: &[usize], axis: usize, out: &mut [f64]) {
    let s = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let inv_h = (s - 1) as f64;
    for (p, o) in out.iter_mut().enumerate() {
        let k = (p / stride) % s;
        *o = if k == 0 {
            (src[p + stride] - src[p]) * inv_h
        } else if k == s - 1 {
            (src[p] - src[p - stride]) * inv_h
        } else {
            (src[p + stride] - src[p - stride]) * 0.5 * inv_h
        };
    }
}

/// Accumulates `D_axis^T g` into `out`.
fn diff_axis_adjoint(g: &[f64], shape: &[usize], axis: usize, out: &mut [f64]) {
    let s = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let inv_h = (s - 1) as f64;
    for (p, &gp) in g.iter().enumerate() {
        if gp == 0.0 {
            continue;
        }
        let k = (p / stride) % s;
        if k == 0 {
            out[p + stride] += gp * inv_h;
            out[p] -= gp * inv_h;
        } else if k == s - 1 {
            out[p] += gp * inv_h;
            out[p - stride] -= gp * inv_h;
        } else {
            out[p + stride] += gp * 0.5 * inv_h;
            out[p - stride] -= gp * 0.5 * inv_h;
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop when the gradient per unit volume is below `tol (1 + |energy|)`.
    pub tol: f64,
    pub seed: u64,
    pub memory: usize,
    /// Amplitude of a seeded random perturbation of the starting field.
    pub start_perturbation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iter: 2000, tol: 1e-8, seed: 0, memory: 10, start_perturbation: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Minimization {
    #[serde(skip)]
    pub field: GridField<f64>,
    pub energy: f64,
    /// Energy after every accepted step; nonincreasing up to rounding.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was reached first (the best iterate is
    /// still returned).
    pub converged: bool,
    pub gradient_sup: f64,
}

/// Limited-memory quasi-Newton descent on the discrete energy, starting from
/// [`EnergyProblem::initial_field`] or `start`.
pub fn minimize(problem: &EnergyProblem, start: Option<&GridField<f64>>, config: &SolverConfig) -> Result<Minimization> {
    let base = match start {
        Some(s) => {
            problem.check_field(s)?;
            let mut s = s.clone();
            // frozen values always come from the datum
            if let Boundary::Dirichlet { datum } = &problem.boundary {
                let pts = s.points();
                for c in 0..s.components() {
                    for p in 0..pts {
                        if !problem.free[p] {
                            s.values_mut()[c * pts + p] = datum.values()[c * pts + p];
                        }
                    }
                }
            }
            s
        }
        None => problem.initial_field(),
    };
    let mut x0 = problem.gather(&base);
    if config.start_perturbation != 0.0 {
        let mut r = rng::stream(config.seed, 0x57a7);
        x0.iter_mut().for_each(|v| *v += config.start_perturbation * r.random_range(-1.0..1.0));
    }
    let eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let u = problem.scatter(x, &base);
        let (e, g) = problem.energy_and_gradient(&u)?;
        Ok((e, problem.gather(&g)))
    };
    let pts = problem.weights.len();
    let free_weights: Vec<f64> = (0..problem.op.dim_v())
        .flat_map(|_| (0..pts).filter(|&p| problem.free[p]).map(|p| problem.weights[p]))
        .collect();
    let sup = |g: &[f64]| g.iter().zip(&free_weights).map(|(g, w)| (g / w).abs()).fold(0.0, f64::max);
    let conv = |f: f64, g: &[f64]| sup(g) <= config.tol * (1.0 + f.abs());
    let cfg = LbfgsConfig { max_iter: config.max_iter, memory: config.memory.max(1), ..Default::default() };
    let res = lbfgs(&eval, &conv, x0, &cfg)?;
    let (_, g) = eval(&res.x)?;
    let mut field = problem.scatter(&res.x, &base);
    field.domain = problem.domain();
    field.mean_zero = false;
    Ok(Minimization {
        field,
        energy: res.value,
        trace: res.trace,
        iterations: res.iterations,
        converged: res.converged,
        gradient_sup: sup(&g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::*;
    use crate::variational::*;

    fn fd_check(problem: &EnergyProblem, u: &GridField<f64>, probes: &[usize]) {
        let (_, g) = problem.energy_and_gradient(u).unwrap();
        for &k in probes {
            let h = 1e-6;
            let mut up = u.clone();
            let mut um = u.clone();
            up.values_mut()[k] += h;
            um.values_mut()[k] -= h;
            let fd = (problem.energy(&up).unwrap() - problem.energy(&um).unwrap()) / (2.0 * h);
            let an = g.values()[k];
            assert!((fd - an).abs() <= 1e-5 * (an.abs() + 1e-6), "k={k}: fd {fd} vs {an}");
        }
    }

    #[test]
    fn periodic_gradient_matches_differences() {
        let op = symmetric_gradient::<f64>(2);
        let f = Arc::new(VpIntegrand::new(3.0).unwrap());
        let prob = EnergyProblem::periodic(&op, f, &[16, 16], Some(vec![0.2, 0.1, 0.1, -0.3])).unwrap();
        let u = spectral::random_band_limited::<f64>(&[16, 16], 2, 3, 1.0, 4).unwrap();
        fd_check(&prob, &u, &[0, 17, 100, 300, 511]);
    }

    #[test]
    fn second_order_periodic_gradient_matches_differences() {
        let op = split_laplace_beltrami::<f64>(2, 1).unwrap();
        let f = Arc::new(NonAutonomousVp::new(2.5, 0.3).unwrap());
        let prob = EnergyProblem::periodic(&op, f, &[16, 16], None).unwrap();
        let u = spectral::random_band_limited::<f64>(&[16, 16], 2, 3, 1.0, 4).unwrap();
        fd_check(&prob, &u, &[3, 40, 257, 400]);
    }

    #[test]
    fn dirichlet_gradient_matches_differences() {
        let op = div_curl::<f64>();
        let f = Arc::new(VpIntegrand::new(3.0).unwrap());
        let datum = spectral::random_band_limited::<f64>(&[8, 8, 8], 3, 1, 1.0, 2).unwrap();
        let prob = EnergyProblem::dirichlet(&op, f, &datum).unwrap();
        let (_, g) = prob.energy_and_gradient(&datum).unwrap();
        assert_eq!(g.values()[0], 0.0);
        // interior probes in each component
        fd_check(&prob, &datum, &[73, 146, 512 + 219, 1024 + 300]);
    }

    #[test]
    fn summation_by_parts_kills_constant_cross_terms() {
        let shape = [8usize, 16];
        let mut phi = vec![0.0; 128];
        let mut rng = rng::stream(1, 1);
        let mut idx = [0usize; 2];
        for (p, v) in phi.iter_mut().enumerate() {
            unravel(&shape, p, &mut idx);
            if idx[0] > 0 && idx[0] < 7 && idx[1] > 0 && idx[1] < 15 {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let op = gradient::<f64>(2, 1);
        let f = Arc::new(VpIntegrand::new(2.0).unwrap());
        let datum = GridField::zeros(shape.to_vec(), 1).unwrap();
        let prob = EnergyProblem::dirichlet(&op, f, &datum).unwrap();
        for axis in 0..2 {
            let mut d = vec![0.0; 128];
            diff_axis(&phi, &shape, axis, &mut d);
            let s: f64 = d.iter().zip(prob.weights()).map(|(a, w)| a * w).sum();
            assert!(s.abs() < 1e-14, "{s}");
        }
    }

    #[test]
    fn differences_are_exact_on_affine_fields() {
        let shape = [8usize, 4];
        let mut u = vec![0.0; 32];
        let mut idx = [0usize; 2];
        for (p, v) in u.iter_mut().enumerate() {
            unravel(&shape, p, &mut idx);
            *v = 2.0 * idx[0] as f64 / 7.0 - 3.0 * idx[1] as f64 / 3.0;
        }
        let mut d = vec![0.0; 32];
        diff_axis(&u, &shape, 0, &mut d);
        assert!(d.iter().all(|v| (v - 2.0).abs() < 1e-12));
        diff_axis(&u, &shape, 1, &mut d);
        assert!(d.iter().all(|v| (v + 3.0).abs() < 1e-12));
    }

    #[test]
    fn adjoint_is_the_transpose() {
        let shape = [4usize, 8];
        let mut rng = rng::stream(2, 2);
        let a: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        for axis in 0..2 {
            let mut da = vec![0.0; 32];
            diff_axis(&a, &shape, axis, &mut da);
            let mut dtb = vec![0.0; 32];
            diff_axis_adjoint(&b, &shape, axis, &mut dtb);
            let lhs: f64 = da.iter().zip(&b).map(|(x, y)| x * y).sum();
            let rhs: f64 = a.iter().zip(&dtb).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_energy_equals_energy() {
        let op = symmetric_gradient::<f64>(2);
        let f: Arc<dyn Integrand> = Arc::new(NonAutonomousVp::new(3.0, 0.2).unwrap());
        let g = reduce_integrand(f.clone(), &op).unwrap();
        let prob = EnergyProblem::periodic(&op, f.clone(), &[16, 16], Some(vec![0.3, 0.1, 0.1, -0.2])).unwrap();
        let u = spectral::random_band_limited::<f64>(&[16, 16], 2, 4, 1.0, 9).unwrap();
        let (e, r) = (prob.energy(&u).unwrap(), prob.reduced_energy(&g, &u).unwrap());
        assert!((e - r).abs() <= 1e-12 * (1.0 + e.abs()), "{e} {r}");
        let datum = crate::variational::sinusoidal_datum(&[16, 16], 2, 0.7, 1.0).unwrap();
        let prob = EnergyProblem::dirichlet(&op, f, &datum).unwrap();
        let (e, r) = (prob.energy(&datum).unwrap(), prob.reduced_energy(&g, &datum).unwrap());
        assert!((e - r).abs() <= 1e-12 * (1.0 + e.abs()), "{e} {r}");
    }

    #[test]
    fn higher_order_dirichlet_is_unsupported() {
        let op = split_laplace_beltrami::<f64>(2, 1).unwrap();
        let datum = GridField::zeros(vec![8, 8], 2).unwrap();
        let err = EnergyProblem::dirichlet(&op, Arc::new(VpIntegrand::new(2.0).unwrap()), &datum).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn periodic_cell_problem_relaxes_to_zero_perturbation_for_convex_energy() {
        let op = symmetric_gradient::<f64>(2);
        let prob =
            EnergyProblem::periodic(&op, Arc::new(VpIntegrand::new(3.0).unwrap()), &[16, 16], Some(vec![0.5, 0.2, 0.2, 0.0]))
                .unwrap();
        let start = spectral::random_band_limited::<f64>(&[16, 16], 2, 3, 1.0, 1).unwrap();
        let r = minimize(&prob, Some(&start), &SolverConfig::default()).unwrap();
        assert!(r.converged);
        let z = [0.5f64, 0.2, 0.2, 0.0];
        let affine = crate::nfunctions::v_p(3.0, &z);
        assert!((r.energy - affine).abs() < 1e-9 * affine);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0] + 1e-14 * w[0].abs()));
    }
}
