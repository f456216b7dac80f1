//! FFT-based calculus on the torus `[0,1)^n`: lattice frequencies, spectral
//! derivatives, operators applied in Fourier space, and random test fields.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::linalg::{multi_indices, MultiIndex};
use crate::operators::DifferentialOperator;
use crate::rng;
use crate::scalar::Real;

/// Signed frequency of index `i` on an axis of size `s`, in `(-s/2, s/2]`.
pub fn signed_frequency(i: usize, s: usize) -> i64 {
    if i <= s / 2 {
        i as i64
    } else {
        i as i64 - s as i64
    }
}

pub fn is_nyquist(i: usize, s: usize) -> bool {
    s.is_multiple_of(2) && i == s / 2
}

/// Fourier coefficients of every component, same layout as [`GridField`].
#[derive(Clone, Debug)]
pub struct Spectrum<T: Real> {
    pub shape: Vec<usize>,
    pub components: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn component(&self, c: usize) -> &[Complex<T>] {
        let p = self.points();
        &self.data[c * p..(c + 1) * p]
    }

    /// Lattice index of flat point `p`.
    pub fn index(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = p % self.shape[a];
            p /= self.shape[a];
        }
        idx
    }

    /// Signed integer frequencies `k` at flat point `p`.
    pub fn frequency(&self, p: usize) -> Vec<i64> {
        self.index(p)
            .iter()
            .zip(&self.shape)
            .map(|(&i, &s)| signed_frequency(i, s))
            .collect()
    }

    pub fn zeros(shape: &[usize], components: usize) -> Self {
        let len = shape.iter().product::<usize>() * components;
        Self {
            shape: shape.to_vec(),
            components,
            data: vec![Complex::new(T::zero(), T::zero()); len],
        }
    }
}

pub fn forward<T: Real>(field: &GridField<T>) -> Spectrum<T> {
    let pts = field.points();
    let shape = field.shape().to_vec();
    let mut data: Vec<Complex<T>> = field.values().iter().map(|&v| Complex::new(v, T::zero())).collect();
    data.par_chunks_mut(pts).for_each(|chunk| T::fft_nd(chunk, &shape, false));
    Spectrum {
        shape,
        components: field.components(),
        data,
    }
}

/// Inverse transform, keeping the real part.
pub fn inverse<T: Real>(spec: &Spectrum<T>) -> GridField<T> {
    let pts = spec.points();
    let mut data = spec.data.clone();
    data.par_chunks_mut(pts).for_each(|chunk| T::fft_nd(chunk, &spec.shape, true));
    let values = data.into_iter().map(|c| c.re).collect();
    GridField::new(spec.shape.clone(), spec.components, values).expect("layout preserved")
}

/// Fourier factor of `d^alpha` at lattice index `idx`:
/// `prod (2 pi i k_a)^{alpha_a}`, zero if an axis with odd `alpha_a` sits at
/// the Nyquist frequency.
pub fn derivative_factor<T: Real>(alpha: &MultiIndex, idx: &[usize], shape: &[usize]) -> Complex<T> {
    let two_pi = std::f64::consts::TAU;
    let mut re = 1.0f64;
    let mut im = 0.0f64;
    for ((&a, &i), &s) in alpha.0.iter().zip(idx).zip(shape) {
        if a == 0 {
            continue;
        }
        if a % 2 == 1 && is_nyquist(i, s) {
            return Complex::new(T::zero(), T::zero());
        }
        let k = two_pi * signed_frequency(i, s) as f64;
        for _ in 0..a {
            // multiply by i k
            let (r, m) = (-im * k, re * k);
            re = r;
            im = m;
        }
    }
    Complex::new(T::lit(re), T::lit(im))
}

/// Spectral `d^alpha` of each component.
pub fn derivative<T: Real>(u: &GridField<T>, alpha: &MultiIndex) -> Result<GridField<T>> {
    if alpha.dim() != u.n() {
        return Err(Error::DimensionMismatch {
            context: "multi-index length",
            expected: u.n(),
            found: alpha.dim(),
        });
    }
    let mut spec = forward(u);
    let pts = spec.points();
    let factors: Vec<Complex<T>> = (0..pts)
        .map(|p| derivative_factor(alpha, &spec.index(p), &spec.shape))
        .collect();
    for chunk in spec.data.chunks_mut(pts) {
        for (v, f) in chunk.iter_mut().zip(&factors) {
            *v *= *f;
        }
    }
    Ok(inverse(&spec))
}

/// All order-`m` derivatives `D^m u`; component `c * #alpha + a` holds
/// `d^{alpha_a} u_c` with `alpha_a` enumerated by [`multi_indices`].
pub fn derivatives<T: Real>(u: &GridField<T>, m: u32) -> GridField<T> {
    let spec = forward(u);
    derivatives_from_spectrum(&spec, m)
}

pub fn derivatives_from_spectrum<T: Real>(spec: &Spectrum<T>, m: u32) -> GridField<T> {
    let n = spec.shape.len();
    let alphas = multi_indices(n, m);
    let na = alphas.len();
    let pts = spec.points();
    let mut out = Spectrum::zeros(&spec.shape, spec.components * na);
    for (a, alpha) in alphas.iter().enumerate() {
        let factors: Vec<Complex<T>> = (0..pts)
            .map(|p| derivative_factor(alpha, &spec.index(p), &spec.shape))
            .collect();
        for c in 0..spec.components {
            let src = spec.component(c);
            let dst = &mut out.data[(c * na + a) * pts..(c * na + a + 1) * pts];
            for ((d, s), f) in dst.iter_mut().zip(src).zip(&factors) {
                *d = *s * *f;
            }
        }
    }
    inverse(&out)
}

/// Fourier coefficients of `A u` given those of `u`.
pub fn apply_operator_spectrum<T: Real>(op: &DifferentialOperator<T>, spec: &Spectrum<T>) -> Result<Spectrum<T>> {
    if spec.components != op.dim_v() {
        return Err(Error::DimensionMismatch {
            context: "field components vs dim V",
            expected: op.dim_v(),
            found: spec.components,
        });
    }
    if spec.shape.len() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "grid dimension vs operator dimension",
            expected: op.n(),
            found: spec.shape.len(),
        });
    }
    let pts = spec.points();
    let l = op.dim_w();
    let coeffs: Vec<(MultiIndex, nalgebra::DMatrix<T>)> =
        op.coefficients().map(|(a, m)| (a.clone(), m.clone())).collect();
    let rows: Vec<Vec<Complex<T>>> = (0..pts)
        .into_par_iter()
        .map(|p| {
            let idx = spec.index(p);
            let mut w = vec![Complex::new(T::zero(), T::zero()); l];
            for (alpha, mat) in &coeffs {
                let f = derivative_factor::<T>(alpha, &idx, &spec.shape);
                if f.re == T::zero() && f.im == T::zero() {
                    continue;
                }
                for k in 0..spec.components {
                    let uk = spec.data[k * pts + p] * f;
                    for (r, wr) in w.iter_mut().enumerate() {
                        let a = mat[(r, k)];
                        if a != T::zero() {
                            *wr += uk * a;
                        }
                    }
                }
            }
            w
        })
        .collect();
    let mut out = Spectrum::zeros(&spec.shape, l);
    for (p, w) in rows.into_iter().enumerate() {
        for (r, v) in w.into_iter().enumerate() {
            out.data[r * pts + p] = v;
        }
    }
    Ok(out)
}

/// `A u` computed spectrally.
pub fn apply_operator<T: Real>(op: &DifferentialOperator<T>, u: &GridField<T>) -> Result<GridField<T>> {
    Ok(inverse(&apply_operator_spectrum(op, &forward(u))?))
}

/// Random real field whose Fourier modes satisfy `0 < max_a |k_a| <= cutoff`,
/// with Gaussian coefficients damped by `(1 + |k|^2)^{-decay/2}`, normalized
/// to unit L2 norm. Mean zero by construction.
pub fn random_band_limited<T: Real>(
    shape: &[usize],
    components: usize,
    cutoff: usize,
    decay: f64,
    seed: u64,
) -> Result<GridField<T>> {
    let mut spec = Spectrum::<T>::zeros(shape, components);
    let pts = spec.points();
    let mut rng = rng::stream(seed, 0x0b1d);
    for c in 0..components {
        for p in 0..pts {
            let k = spec.frequency(p);
            let idx = spec.index(p);
            let inside = k.iter().all(|&x| x.unsigned_abs() as usize <= cutoff)
                && k.iter().any(|&x| x != 0)
                && !idx.iter().zip(shape).any(|(&i, &s)| is_nyquist(i, s));
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            if inside {
                let k2: f64 = k.iter().map(|&x| (x * x) as f64).sum();
                let amp = (1.0 + k2).powf(-decay / 2.0);
                spec.data[c * pts + p] = Complex::new(T::lit(g1 * amp), T::lit(g2 * amp));
            }
        }
    }
    let mut field = inverse(&spec);
    let nrm = field.l2_norm();
    if nrm > T::zero() {
        field.scale(T::one() / nrm);
    }
    field.subtract_mean();
    Ok(field)
}

/// Largest cutoff keeping every mode strictly below half the Nyquist frequency.
pub fn default_cutoff(shape: &[usize]) -> usize {
    let smin = shape.iter().copied().min().unwrap_or(4);
    (smin / 4).saturating_sub(1).max(1)
}

/// Trigonometric interpolation of a torus field onto another grid of the
/// same dimension. Modes that do not fit strictly below the target Nyquist
/// frequency (and Nyquist modes of the source) are dropped, so refining a
/// band-limited field is exact.
pub fn resample<T: Real>(field: &GridField<T>, shape: &[usize]) -> Result<GridField<T>> {
    if shape.len() != field.n() || shape.contains(&0) {
        return Err(Error::DimensionMismatch { context: "resample dimension", expected: field.n(), found: shape.len() });
    }
    let src = forward(field);
    let mut dst = Spectrum::<T>::zeros(shape, field.components());
    let (sp, dp) = (src.points(), dst.points());
    let scale = T::lit(dp as f64 / sp as f64);
    for p in 0..sp {
        let idx = src.index(p);
        if idx.iter().zip(field.shape()).any(|(&i, &s)| is_nyquist(i, s)) {
            continue;
        }
        let k = src.frequency(p);
        if k.iter().zip(shape).any(|(&f, &s)| 2 * f.unsigned_abs() as usize >= s) {
            continue;
        }
        let q = k
            .iter()
            .zip(shape)
            .fold(0usize, |acc, (&f, &s)| acc * s + f.rem_euclid(s as i64) as usize);
        for c in 0..field.components() {
            dst.data[c * dp + q] = src.data[c * sp + p] * scale;
        }
    }
    let mut out = inverse(&dst);
    out.domain = field.domain;
    out.mean_zero = field.mean_zero;
    Ok(out)
}

/// Smooth bump on `[0,1)^n`, equal to `prod exp(1 - 1/(1 - s_a^2))` with
/// `s_a = (x_a - 1/2) / radius` inside the cube of half-width `radius` and
/// zero outside.
pub fn bump<T: Real>(shape: &[usize], radius: f64) -> Result<GridField<T>> {
    GridField::from_fn(shape.to_vec(), 1, |x, out| {
        let mut v = 1.0;
        for &xa in x {
            let s = (xa - 0.5) / radius;
            if s.abs() >= 1.0 {
                v = 0.0;
                break;
            }
            v *= (1.0 - 1.0 / (1.0 - s * s)).exp();
        }
        out[0] = T::lit(v);
    })
}

/// The vector `(d^alpha u(x_p))_alpha` of one component list at point `p`,
/// read from a [`derivatives`] field: returns one `DVector` in V per
/// multi-index.
pub fn derivative_vectors_at<T: Real>(du: &GridField<T>, big_n: usize, na: usize, p: usize) -> Vec<DVector<T>> {
    let pts = du.points();
    let vals = du.values();
    (0..na)
        .map(|a| DVector::from_fn(big_n, |c, _| vals[(c * na + a) * pts + p]))
        .collect()
}
