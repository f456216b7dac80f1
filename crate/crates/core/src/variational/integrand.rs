use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::nfunctions::{v_p, v_p_gradient, v_p_hessian};
use crate::operators::{reduce_to_gradient_form, DifferentialOperator, GradientReduction};
use crate::scalar::Real;

/// `omega(t) = constant * t^exponent`, the continuity modulus in `(x, y)`:
/// `|F(x,y,z) - F(x',y',z)| <= omega(|x-x'|^p + |y-y'|^p) (1 + |z|^p)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Modulus {
    pub constant: f64,
    pub exponent: f64,
}

impl Modulus {
    pub fn eval(&self, t: f64) -> f64 {
        self.constant * t.max(0.0).powf(self.exponent)
    }
}

/// An integrand `F(x, y, z)` with `x` in the domain, `y` the field value and
/// `z` the value of `A u` in `W`.
pub trait Integrand: Send + Sync + fmt::Debug {
    fn label(&self) -> String;

    /// Growth exponent `p`.
    fn exponent(&self) -> f64;

    /// Dimension of `z`, when the integrand only makes sense on one space.
    fn dim(&self) -> Option<usize> {
        None
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn depends_on_y(&self) -> bool {
        false
    }

    fn value(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64;

    /// `D_z F` written into `out`.
    fn gradient(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]);

    /// `D_y F` written into `out`; only called when [`depends_on_y`] holds.
    ///
    /// [`depends_on_y`]: Integrand::depends_on_y
    fn gradient_y(&self, _x: &[f64], _y: &[f64], _z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    /// `D_zz F`.
    fn hessian(&self, x: &[f64], y: &[f64], z: &[f64]) -> DMatrix<f64>;

    /// `c` with `|F(x, y, z)| <= c (1 + |z|^p)`.
    fn growth_constant(&self) -> f64;

    /// `l` with `F - l V_p` quasiconvex, when declared.
    fn coercivity(&self) -> Option<f64> {
        None
    }

    /// Continuity modulus in `(x, y)` for non-autonomous integrands.
    fn modulus(&self) -> Option<Modulus> {
        None
    }
}

fn check_p(p: f64) -> Result<f64> {
    if p.is_finite() && p > 1.0 {
        Ok(p)
    } else {
        Err(Error::InvalidArgument(format!("growth exponent must be > 1, got {p}")))
    }
}

/// Growth constant of `V_p`: `(1+t^2)^{p/2} - 1 <= max(1, 2^{p/2-1}) (1 + t^p)`.
fn vp_growth(p: f64) -> f64 {
    2f64.powf(p / 2.0 - 1.0).max(1.0)
}

/// `F(z) = V_p(z) = (1 + |z|^2)^{p/2} - 1`.
#[derive(Clone, Debug)]
pub struct VpIntegrand {
    pub p: f64,
}

impl VpIntegrand {
    pub fn new(p: f64) -> Result<Self> {
        Ok(Self { p: check_p(p)? })
    }
}

impl Integrand for VpIntegrand {
    fn label(&self) -> String {
        format!("vp:{}", self.p)
    }
    fn exponent(&self) -> f64 {
        self.p
    }
    fn value(&self, _x: &[f64], _y: &[f64], z: &[f64]) -> f64 {
        v_p(self.p, z)
    }
    fn gradient(&self, _x: &[f64], _y: &[f64], z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&v_p_gradient(self.p, z));
    }
    fn hessian(&self, _x: &[f64], _y: &[f64], z: &[f64]) -> DMatrix<f64> {
        v_p_hessian(self.p, z)
    }
    fn growth_constant(&self) -> f64 {
        vp_growth(self.p)
    }
    fn coercivity(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `F(x, z) = (1 + min(|x|, 1)^{sigma p}) V_p(z)`, Hölder in `x` with
/// modulus `omega(t) = c t^sigma` when `sigma p <= 1`.
#[derive(Clone, Debug)]
pub struct NonAutonomousVp {
    pub p: f64,
    pub sigma: f64,
}

impl NonAutonomousVp {
    pub fn new(p: f64, sigma: f64) -> Result<Self> {
        let p = check_p(p)?;
        if !(sigma > 0.0 && sigma * p <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < sigma <= 1/p, got sigma = {sigma} with p = {p}"
            )));
        }
        Ok(Self { p, sigma })
    }

    pub fn weight(&self, x: &[f64]) -> f64 {
        1.0 + crate::scalar::norm(x).min(1.0).powf(self.sigma * self.p)
    }
}

impl Integrand for NonAutonomousVp {
    fn label(&self) -> String {
        format!("nonautonomous:{}:{}", self.p, self.sigma)
    }
    fn exponent(&self) -> f64 {
        self.p
    }
    fn is_autonomous(&self) -> bool {
        false
    }
    fn value(&self, x: &[f64], _y: &[f64], z: &[f64]) -> f64 {
        self.weight(x) * v_p(self.p, z)
    }
    fn gradient(&self, x: &[f64], _y: &[f64], z: &[f64], out: &mut [f64]) {
        let w = self.weight(x);
        for (o, g) in out.iter_mut().zip(v_p_gradient(self.p, z)) {
            *o = w * g;
        }
    }
    fn hessian(&self, x: &[f64], _y: &[f64], z: &[f64]) -> DMatrix<f64> {
        v_p_hessian(self.p, z) * self.weight(x)
    }
    fn growth_constant(&self) -> f64 {
        2.0 * vp_growth(self.p)
    }
    fn coercivity(&self) -> Option<f64> {
        Some(1.0)
    }
    fn modulus(&self) -> Option<Modulus> {
        Some(Modulus { constant: vp_growth(self.p), exponent: self.sigma })
    }
}

/// `F(z) = -|z|^2`: concave along every direction.
#[derive(Clone, Debug, Default)]
pub struct ConcaveQuadratic;

impl Integrand for ConcaveQuadratic {
    fn label(&self) -> String {
        "concave_quadratic".into()
    }
    fn exponent(&self) -> f64 {
        2.0
    }
    fn value(&self, _x: &[f64], _y: &[f64], z: &[f64]) -> f64 {
        -z.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, _x: &[f64], _y: &[f64], z: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(z) {
            *o = -2.0 * v;
        }
    }
    fn hessian(&self, _x: &[f64], _y: &[f64], z: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(z.len(), z.len()) * -2.0
    }
    fn growth_constant(&self) -> f64 {
        1.0
    }
}

/// `F(z) = det z + mu V_p(z)` on `2 x 2` matrices (row-major): the
/// determinant is rank-one affine but not convex.
#[derive(Clone, Debug)]
pub struct DetPlusVp {
    pub mu: f64,
    pub p: f64,
}

impl DetPlusVp {
    pub fn new(mu: f64, p: f64) -> Result<Self> {
        let p = check_p(p)?;
        if p < 2.0 {
            return Err(Error::InvalidArgument("the determinant needs p >= 2 for the growth bound".into()));
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { mu, p })
    }
}

impl Integrand for DetPlusVp {
    fn label(&self) -> String {
        format!("det_plus_vp:{}:{}", self.mu, self.p)
    }
    fn exponent(&self) -> f64 {
        self.p
    }
    fn dim(&self) -> Option<usize> {
        Some(4)
    }
    fn value(&self, _x: &[f64], _y: &[f64], z: &[f64]) -> f64 {
        z[0] * z[3] - z[1] * z[2] + self.mu * v_p(self.p, z)
    }
    fn gradient(&self, _x: &[f64], _y: &[f64], z: &[f64], out: &mut [f64]) {
        let g = v_p_gradient(self.p, z);
        let det = [z[3], -z[2], -z[1], z[0]];
        for k in 0..4 {
            out[k] = det[k] + self.mu * g[k];
        }
    }
    fn hessian(&self, _x: &[f64], _y: &[f64], z: &[f64]) -> DMatrix<f64> {
        let mut h = v_p_hessian(self.p, z) * self.mu;
        h[(0, 3)] += 1.0;
        h[(3, 0)] += 1.0;
        h[(1, 2)] -= 1.0;
        h[(2, 1)] -= 1.0;
        h
    }
    fn growth_constant(&self) -> f64 {
        0.5 + self.mu * vp_growth(self.p)
    }
    fn coercivity(&self) -> Option<f64> {
        Some(self.mu)
    }
}

/// `F(z) = |z|^2 / (1 + |z|^2)`: bounded, so it has no coercive lower bound.
#[derive(Clone, Debug, Default)]
pub struct BoundedIntegrand;

impl Integrand for BoundedIntegrand {
    fn label(&self) -> String {
        "bounded".into()
    }
    fn exponent(&self) -> f64 {
        2.0
    }
    fn value(&self, _x: &[f64], _y: &[f64], z: &[f64]) -> f64 {
        let s: f64 = z.iter().map(|v| v * v).sum();
        s / (1.0 + s)
    }
    fn gradient(&self, _x: &[f64], _y: &[f64], z: &[f64], out: &mut [f64]) {
        let s: f64 = z.iter().map(|v| v * v).sum();
        let c = 2.0 / (1.0 + s).powi(2);
        for (o, v) in out.iter_mut().zip(z) {
            *o = c * v;
        }
    }
    fn hessian(&self, _x: &[f64], _y: &[f64], z: &[f64]) -> DMatrix<f64> {
        let s: f64 = z.iter().map(|v| v * v).sum();
        let zv = DVector::from_column_slice(z);
        DMatrix::identity(z.len(), z.len()) * (2.0 / (1.0 + s).powi(2)) - &zv * zv.transpose() * (8.0 / (1.0 + s).powi(3))
    }
    fn growth_constant(&self) -> f64 {
        1.0
    }
}

/// `G(x, y, z) = F(x, y, M z)` on the full derivative space, where
/// `M = proj_1 iota^{-1} (iota')^{-1} pi` maps `D^m u` to `A u`.
#[derive(Clone, Debug)]
pub struct ReducedIntegrand {
    pub inner: Arc<dyn Integrand>,
    pub reduction: GradientReduction<f64>,
    /// The composed linear map `M` (`dim W x N #alpha`).
    pub map: DMatrix<f64>,
    map_norm: f64,
}

impl ReducedIntegrand {
    /// `M z`.
    pub fn target(&self, z: &[f64]) -> Vec<f64> {
        (&self.map * DVector::from_column_slice(z)).as_slice().to_vec()
    }
}

impl Integrand for ReducedIntegrand {
    fn label(&self) -> String {
        format!("reduced({})", self.inner.label())
    }
    fn exponent(&self) -> f64 {
        self.inner.exponent()
    }
    fn dim(&self) -> Option<usize> {
        Some(self.map.ncols())
    }
    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }
    fn depends_on_y(&self) -> bool {
        self.inner.depends_on_y()
    }
    fn value(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        self.inner.value(x, y, &self.target(z))
    }
    fn gradient(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        let w = self.target(z);
        let mut g = vec![0.0; w.len()];
        self.inner.gradient(x, y, &w, &mut g);
        let back = self.map.transpose() * DVector::from_vec(g);
        out.copy_from_slice(back.as_slice());
    }
    fn gradient_y(&self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        self.inner.gradient_y(x, y, &self.target(z), out);
    }
    fn hessian(&self, x: &[f64], y: &[f64], z: &[f64]) -> DMatrix<f64> {
        let h = self.inner.hessian(x, y, &self.target(z));
        self.map.transpose() * h * &self.map
    }
    fn growth_constant(&self) -> f64 {
        self.inner.growth_constant() * self.map_norm.powf(self.exponent()).max(1.0)
    }
    fn modulus(&self) -> Option<Modulus> {
        self.inner.modulus().map(|m| Modulus {
            constant: m.constant * self.map_norm.powf(self.exponent()).max(1.0),
            exponent: m.exponent,
        })
    }
}

pub(crate) fn check_integrand_dim(f: &dyn Integrand, dim_w: usize) -> Result<()> {
    match f.dim() {
        Some(d) if d != dim_w => Err(Error::DimensionMismatch {
            context: "integrand dimension vs dim W",
            expected: dim_w,
            found: d,
        }),
        _ => Ok(()),
    }
}

/// The integrand `G = F o pi_A` on the full derivative space, satisfying
/// `int G(D^m u) = int F(A u)` for every field `u`.
pub fn reduce_integrand<T: Real>(f: Arc<dyn Integrand>, op: &DifferentialOperator<T>) -> Result<ReducedIntegrand> {
    check_integrand_dim(f.as_ref(), op.dim_w())?;
    let reduction = reduce_to_gradient_form(&op.cast::<f64>())?;
    let d = reduction.range_dim();
    let k = reduction.projection.ncols();
    // proj_1 iota^{-1} on vectors of the form iota'(pi z) = (pi z, 0)
    let map = &reduction.range_basis * reduction.kappa_basis.transpose() * &reduction.projection;
    debug_assert_eq!(map.shape(), (op.dim_w(), k));
    let map_norm = if d == 0 { 0.0 } else { linalg::spectral_norm(&map) };
    Ok(ReducedIntegrand { inner: f, reduction, map, map_norm })
}
