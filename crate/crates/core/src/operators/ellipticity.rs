use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::DifferentialOperator;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative threshold on `min sigma_min / ||A||` below which an operator is
/// declared non-elliptic.
pub const ELLIPTICITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct EllipticityReport<T: Real> {
    pub operator: String,
    pub elliptic: bool,
    pub min_sigma: T,
    /// `ELLIPTICITY_TOL * ||A||`.
    pub threshold: T,
    pub operator_norm: T,
    pub witness_xi: Vec<T>,
    /// Unit `v` with `|A[witness_xi] v| = min_sigma`; only for non-elliptic operators.
    pub witness_kernel_vector: Option<Vec<T>>,
    pub constant_rank: bool,
    pub rank_value: Option<usize>,
    pub min_rank: usize,
    pub max_rank: usize,
    pub samples: usize,
}

/// Default sample count for the unit sphere in `R^n`.
pub fn default_sphere_samples(n: usize) -> usize {
    if n <= 3 {
        4096
    } else {
        16384
    }
}

/// Deterministic quasi-uniform points on the unit sphere. The coordinate axes
/// come first; then equispaced angles (n = 2), a Fibonacci lattice (n = 3),
/// or normalized Gaussians driven by a Kronecker sequence (n >= 4).
pub fn sphere_points<T: Real>(n: usize, count: usize) -> Vec<Vec<T>> {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(count.max(n));
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        pts.push(e);
    }
    let rest = count.saturating_sub(n);
    match n {
        1 => {
            if rest > 0 {
                pts.push(vec![-1.0]);
            }
        }
        2 => {
            for k in 0..rest {
                let t = std::f64::consts::TAU * (k as f64 + 0.5) / rest as f64;
                pts.push(vec![t.cos(), t.sin()]);
            }
        }
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for k in 0..rest {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / rest as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden * k as f64;
                pts.push(vec![r * phi.cos(), r * phi.sin(), z]);
            }
        }
        _ => {
            let d = 2 * n.div_ceil(2);
            // Generalized golden ratio: the positive root of x^(d+1) = x + 1.
            let mut g = 1.5f64;
            for _ in 0..64 {
                g = (1.0 + g).powf(1.0 / (d as f64 + 1.0));
            }
            let alpha: Vec<f64> = (1..=d).map(|j| (1.0 / g.powi(j as i32)).fract()).collect();
            let mut k = 0u64;
            while pts.len() < count.max(n) {
                k += 1;
                let u: Vec<f64> = alpha.iter().map(|a| (0.5 + a * k as f64).fract()).collect();
                let mut x = Vec::with_capacity(d);
                for pair in u.chunks(2) {
                    let r = (-2.0 * pair[0].max(1e-300).ln()).sqrt();
                    let t = std::f64::consts::TAU * pair[1];
                    x.push(r * t.cos());
                    x.push(r * t.sin());
                }
                x.truncate(n);
                let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nrm > 1e-12 {
                    pts.push(x.iter().map(|v| v / nrm).collect());
                }
            }
        }
    }
    pts.truncate(count.max(n));
    pts.into_iter()
        .map(|p| p.into_iter().map(T::lit).collect())
        .collect()
}

fn normalize<T: Real>(x: &mut [T]) {
    let nrm = crate::scalar::norm(x);
    if nrm > T::zero() {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
}

pub(crate) fn sign_normalize<T: Real>(v: &mut [T]) {
    let tiny = T::tol(1e-12);
    if let Some(first) = v.iter().find(|x| x.abs() > tiny) {
        if *first < T::zero() {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// Projected-gradient descent of `sigma_min(A[xi])` on the sphere.
fn refine<T: Real>(op: &DifferentialOperator<T>, start: &[T]) -> (Vec<T>, T) {
    let sigma_of = |xi: &[T]| op.symbol_at(xi).map(|s| s.sigma_min()).unwrap_or_else(|_| T::zero());
    let mut xi = start.to_vec();
    let mut sigma = sigma_of(&xi);
    let mut step = T::lit(0.25);
    for _ in 0..200 {
        if sigma <= T::zero() {
            break;
        }
        let s = op.symbol_matrix_unchecked(&xi);
        let sym = super::SymbolMatrix::from_matrix(xi.clone(), s.clone());
        let v = sym.min_right_vector();
        let av = &s * &v;
        let u = &av / sigma;
        let mut g: Vec<T> = (0..op.n())
            .map(|j| u.dot(&(op.symbol_derivative(&xi, j) * &v)))
            .collect();
        let gx = crate::scalar::dot(&g, &xi);
        for (gj, xj) in g.iter_mut().zip(&xi) {
            *gj -= gx * *xj;
        }
        if crate::scalar::norm(&g) < T::tol(1e-14) {
            break;
        }
        let mut accepted = false;
        while step > T::tol(1e-12) {
            let mut trial: Vec<T> = xi.iter().zip(&g).map(|(x, gj)| *x - step * *gj).collect();
            normalize(&mut trial);
            let st = sigma_of(&trial);
            if st < sigma {
                xi = trial;
                sigma = st;
                step = (step * T::lit(2.0)).min(T::one());
                accepted = true;
                break;
            }
            step *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    (xi, sigma)
}

/// Decides ellipticity and constant rank by sampling the unit sphere and
/// refining the smallest `sigma_min` by local descent.
pub fn check_ellipticity<T: Real>(
    op: &DifferentialOperator<T>,
    sphere_samples: usize,
) -> Result<EllipticityReport<T>> {
    let n = op.n();
    if sphere_samples < 2 * n {
        return Err(Error::InvalidArgument(format!(
            "need at least {} sphere samples, got {sphere_samples}",
            2 * n
        )));
    }
    let pts: Vec<Vec<T>> = sphere_points(n, sphere_samples);
    let stats: Vec<(T, usize)> = pts
        .par_iter()
        .map(|xi| {
            let s = super::SymbolMatrix::from_matrix(xi.clone(), op.symbol_matrix_unchecked(xi));
            (s.sigma_min(), s.rank)
        })
        .collect();

    let norm = op.operator_norm();
    let min_sigma = stats.iter().fold(T::max_value().unwrap_or_else(T::one), |a, s| a.min(s.0));
    let tie = T::tol(1e-12) * norm.max(T::one());
    let mut best = stats.iter().position(|s| s.0 <= min_sigma + tie).unwrap_or(0);
    let mut witness = pts[best].clone();
    let mut min_sigma = min_sigma;

    if min_sigma > T::zero() {
        let (xi, sigma) = refine(op, &pts[best]);
        if sigma < min_sigma {
            witness = xi;
            min_sigma = sigma;
            best = usize::MAX;
        }
    }
    let _ = best;

    let threshold = T::lit(ELLIPTICITY_TOL) * norm;
    let elliptic = min_sigma > threshold;
    let witness_kernel_vector = if elliptic {
        None
    } else {
        let s = op.symbol_at(&witness)?;
        let mut v: Vec<T> = s.min_right_vector().iter().copied().collect();
        sign_normalize(&mut v);
        Some(v)
    };
    let min_rank = stats.iter().map(|s| s.1).min().unwrap_or(0);
    let max_rank = stats.iter().map(|s| s.1).max().unwrap_or(0);
    let constant_rank = min_rank == max_rank;
    Ok(EllipticityReport {
        operator: op.label(),
        elliptic,
        min_sigma,
        threshold,
        operator_norm: norm,
        witness_xi: witness,
        witness_kernel_vector,
        constant_rank,
        rank_value: constant_rank.then_some(min_rank),
        min_rank,
        max_rank,
        samples: sphere_samples,
    })
}

impl<T: Real> EllipticityReport<T> {
    /// `|A[witness_xi] v|` for the reported kernel vector.
    pub fn witness_residual(&self, op: &DifferentialOperator<T>) -> Option<T> {
        let v = self.witness_kernel_vector.as_ref()?;
        let s = op.symbol_matrix(&self.witness_xi).ok()?;
        Some((s * DVector::from_column_slice(v)).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::*;

    #[test]
    fn sphere_points_are_unit_and_start_with_axes() {
        for n in 1..=5 {
            let pts: Vec<Vec<f64>> = sphere_points(n, 64);
            assert_eq!(pts.len(), 64.max(n).min(if n == 1 { 2 } else { 64 }));
            assert_eq!(pts[0][0], 1.0);
            for p in &pts {
                let r: f64 = p.iter().map(|x| x * x).sum();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_gradient_lower_bound() {
        for n in [2, 3] {
            let r = check_ellipticity(&symmetric_gradient::<f64>(n), 2048).unwrap();
            assert!(r.elliptic);
            assert!(r.min_sigma >= 1.0 / 2f64.sqrt() - 1e-6);
            assert!(r.constant_rank);
        }
    }

    #[test]
    fn tracefree_in_one_dimension_is_not_elliptic() {
        let op = tracefree_symmetric_gradient::<f64>(1);
        let r = check_ellipticity(&op, 64).unwrap();
        assert!(!r.elliptic);
        assert!(r.witness_residual(&op).unwrap() <= 1e-8);
    }

    #[test]
    fn curl_witness_is_parallel() {
        let op = curl::<f64>(3);
        let r = check_ellipticity(&op, 512).unwrap();
        assert!(!r.elliptic);
        assert!(r.constant_rank);
        assert_eq!(r.rank_value, Some(2));
        assert_eq!(r.witness_xi, vec![1.0, 0.0, 0.0]);
        assert_eq!(r.witness_kernel_vector.as_deref(), Some(&[1.0, 0.0, 0.0][..]));
    }

    #[test]
    fn partial_derivative_witness() {
        let op = partial::<f64>(2, 0);
        let r = check_ellipticity(&op, 256).unwrap();
        assert!(!r.elliptic);
        assert_eq!(r.witness_xi, vec![0.0, 1.0]);
        assert!(!r.constant_rank);
    }

    #[test]
    fn refinement_finds_the_true_minimum() {
        // sigma_min of eps[xi] on the circle is 1/sqrt 2 exactly.
        let r = check_ellipticity(&symmetric_gradient::<f64>(2), 8).unwrap();
        assert!((r.min_sigma - 1.0 / 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn too_few_samples() {
        assert!(check_ellipticity(&symmetric_gradient::<f64>(3), 5).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let r = check_ellipticity(&div_curl::<f32>(), 512).unwrap();
        assert!(r.elliptic);
        assert!((r.min_sigma - 1.0).abs() < 1e-4);
    }
}
