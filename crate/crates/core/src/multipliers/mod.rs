//! Korn-type Fourier multipliers on the torus: the kernels
//! `Theta_alpha(xi) = xi^alpha (A*[xi] A[xi])^{-1} A*[xi]` that recover
//! `d^alpha u` from `A u`, and empirical Korn-type ratios.

mod korn;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::linalg::MultiIndex;
use crate::operators::{check_ellipticity, default_sphere_samples, DifferentialOperator};
use crate::scalar::Real;
use crate::spectral::{self, is_nyquist, signed_frequency, Spectrum};

pub use korn::{
    korn_modular_ratio, korn_modular_ratios, muckenhoupt_constant, solenoidal_field, weighted_korn_ratio, KornRatio,
    WeightedKornReport,
};

type Evaluator<T> = dyn Fn(&[T]) -> DMatrix<T> + Send + Sync;

/// A matrix-valued Fourier multiplier `xi -> Theta(xi)`, homogeneous of
/// degree zero for the kernels built here. `Theta(0)` is always the zero
/// matrix, so the mean of a field is annihilated.
#[derive(Clone)]
pub struct MultiplierKernel<T: Real> {
    pub label: String,
    pub source_dim: usize,
    pub target_dim: usize,
    /// `Theta(-xi) = -Theta(xi)`; Nyquist modes are then zeroed.
    pub odd: bool,
    eval: Arc<Evaluator<T>>,
}

impl<T: Real> std::fmt::Debug for MultiplierKernel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiplierKernel")
            .field("label", &self.label)
            .field("source_dim", &self.source_dim)
            .field("target_dim", &self.target_dim)
            .field("odd", &self.odd)
            .finish()
    }
}

impl<T: Real> MultiplierKernel<T> {
    pub fn new(
        label: impl Into<String>,
        source_dim: usize,
        target_dim: usize,
        odd: bool,
        eval: impl Fn(&[T]) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            source_dim,
            target_dim,
            odd,
            eval: Arc::new(eval),
        }
    }

    pub fn evaluate(&self, xi: &[T]) -> DMatrix<T> {
        if xi.iter().all(|x| *x == T::zero()) {
            return DMatrix::zeros(self.target_dim, self.source_dim);
        }
        (self.eval)(xi)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new("identity", dim, dim, false, move |_| DMatrix::identity(dim, dim))
    }

    pub fn zero(source_dim: usize, target_dim: usize) -> Self {
        Self::new("zero", source_dim, target_dim, false, move |_| {
            DMatrix::zeros(target_dim, source_dim)
        })
    }

    /// `xi_j xi^T / |xi|^2`, sending `grad u` to `d_j u` for scalar `u`.
    pub fn riesz(n: usize, j: usize) -> Self {
        Self::new(format!("riesz:{}", j + 1), n, 1, false, move |xi: &[T]| {
            let r2 = xi.iter().fold(T::zero(), |a, &x| a + x * x);
            DMatrix::from_fn(1, n, |_, c| xi[j] * xi[c] / r2)
        })
    }
}

/// `(A*[xi] A[xi])^{-1} A*[xi]` at `xi / |xi|`, or `None` if the normal
/// matrix is not positive definite.
fn left_inverse<T: Real>(op: &DifferentialOperator<T>, unit_xi: &[T]) -> Option<DMatrix<T>> {
    let a = op.symbol_matrix(unit_xi).ok()?;
    let at = a.transpose();
    let chol = (&at * &a).cholesky()?;
    Some(chol.solve(&at))
}

fn ensure_elliptic<T: Real>(op: &DifferentialOperator<T>) -> Result<()> {
    let report = check_ellipticity(op, default_sphere_samples(op.n()))?;
    if !report.elliptic {
        return Err(Error::NonElliptic {
            xi: report.witness_xi.iter().map(|x| x.as_f64()).collect(),
            sigma: report.min_sigma.as_f64(),
        });
    }
    Ok(())
}

/// `Theta_alpha(xi) = xi^alpha (A*A)^{-1} A*` for an elliptic operator and
/// `|alpha| = m`.
pub fn build_korn_multiplier<T: Real>(
    op: &DifferentialOperator<T>,
    alpha: &MultiIndex,
) -> Result<MultiplierKernel<T>> {
    if alpha.dim() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "multi-index length",
            expected: op.n(),
            found: alpha.dim(),
        });
    }
    if alpha.order() != op.order() {
        return Err(Error::InvalidArgument(format!(
            "multi-index order {} differs from operator order {}",
            alpha.order(),
            op.order()
        )));
    }
    ensure_elliptic(op)?;
    let op = op.clone();
    let alpha = alpha.clone();
    let (big_n, l) = (op.dim_v(), op.dim_w());
    let label = format!("korn:{}:{:?}", op.label(), alpha.0);
    Ok(MultiplierKernel::new(label, l, big_n, false, move |xi: &[T]| {
        let r = crate::scalar::norm(xi);
        let unit: Vec<T> = xi.iter().map(|&x| x / r).collect();
        match left_inverse(&op, &unit) {
            Some(m) => m * alpha.monomial(&unit),
            None => DMatrix::zeros(big_n, l),
        }
    }))
}

/// Angular frequency `2 pi k` of lattice point `idx`.
fn lattice_xi<T: Real>(idx: &[usize], shape: &[usize]) -> Vec<T> {
    idx.iter()
        .zip(shape)
        .map(|(&i, &s)| T::lit(std::f64::consts::TAU * signed_frequency(i, s) as f64))
        .collect()
}

fn multiply_spectrum<T: Real>(
    spec: &Spectrum<T>,
    target_dim: usize,
    odd: bool,
    theta: impl Fn(&[T]) -> DMatrix<T> + Sync,
) -> Spectrum<T> {
    let pts = spec.points();
    let shape = spec.shape.clone();
    let rows: Vec<Vec<Complex<T>>> = (0..pts)
        .into_par_iter()
        .map(|p| {
            let idx = spec.index(p);
            let zero = vec![Complex::new(T::zero(), T::zero()); target_dim];
            if idx.iter().all(|&i| i == 0) {
                return zero;
            }
            if odd && idx.iter().zip(&shape).any(|(&i, &s)| is_nyquist(i, s)) {
                return zero;
            }
            let m = theta(&lattice_xi(&idx, &shape));
            let re = DVector::from_fn(spec.components, |c, _| spec.data[c * pts + p].re);
            let im = DVector::from_fn(spec.components, |c, _| spec.data[c * pts + p].im);
            let (ore, oim) = (&m * re, &m * im);
            (0..target_dim).map(|r| Complex::new(ore[r], oim[r])).collect()
        })
        .collect();
    let mut out = Spectrum::zeros(&spec.shape, target_dim);
    for (p, row) in rows.into_iter().enumerate() {
        for (r, v) in row.into_iter().enumerate() {
            out.data[r * pts + p] = v;
        }
    }
    out
}

/// Applies a multiplier to a periodic field: forward FFT, multiplication by
/// `Theta(2 pi k)` at every lattice frequency, inverse FFT, real part.
pub fn apply_multiplier<T: Real>(kernel: &MultiplierKernel<T>, field: &GridField<T>) -> Result<GridField<T>> {
    if field.components() != kernel.source_dim {
        return Err(Error::DimensionMismatch {
            context: "field components vs multiplier source dimension",
            expected: kernel.source_dim,
            found: field.components(),
        });
    }
    let spec = spectral::forward(field);
    let out = multiply_spectrum(&spec, kernel.target_dim, kernel.odd, |xi| kernel.evaluate(xi));
    Ok(spectral::inverse(&out))
}

/// Recovers `D^m u` (derivative layout of [`spectral::derivatives`]) from
/// `A u` by applying `Theta_alpha` for every `|alpha| = m`. The left inverse
/// is computed once per frequency and shared by all multi-indices.
pub fn reconstruct_derivatives<T: Real>(op: &DifferentialOperator<T>, au: &GridField<T>) -> Result<GridField<T>> {
    if au.components() != op.dim_w() {
        return Err(Error::DimensionMismatch {
            context: "field components vs dim W",
            expected: op.dim_w(),
            found: au.components(),
        });
    }
    if au.n() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "grid dimension vs operator dimension",
            expected: op.n(),
            found: au.n(),
        });
    }
    ensure_elliptic(op)?;
    let alphas = op.multi_indices();
    let na = alphas.len();
    let big_n = op.dim_v();
    let spec = spectral::forward(au);
    let out = multiply_spectrum(&spec, big_n * na, false, |xi| {
        let r = crate::scalar::norm(xi);
        let unit: Vec<T> = xi.iter().map(|&x| x / r).collect();
        let pinv = left_inverse(op, &unit).unwrap_or_else(|| DMatrix::zeros(big_n, op.dim_w()));
        let mut m = DMatrix::zeros(big_n * na, op.dim_w());
        for (a, alpha) in alphas.iter().enumerate() {
            let c = alpha.monomial(&unit);
            for k in 0..big_n {
                m.set_row(k * na + a, &(pinv.row(k) * c));
            }
        }
        m
    });
    Ok(spectral::inverse(&out))
}
