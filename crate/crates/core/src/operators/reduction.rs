use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{DifferentialOperator, RANK_TOL};
use crate::error::Result;
use crate::linalg::{self, MultiIndex};
use crate::scalar::Real;

/// Identification of an operator `A: V -> W` with an operator into the full
/// derivative space `R^{N x #alpha}` (`R^{N x n}` for first-order operators).
///
/// Derivative-space coordinates are row-major: entry `k * #alpha + a` holds
/// `d^{alpha_a} v_k`. Everything is built from the SVD `P = U S V^T` of the
/// map `P: D^m v -> A v`; `kappa` sends the orthonormal basis `U_d` of the
/// essential range to the right singular vectors `V_d`, `kappa'` spans the
/// orthogonal complement, and `lambda`, `iota'` are identities.
#[derive(Clone, Debug, Serialize)]
pub struct GradientReduction<T: Real> {
    /// The operator `A~ = iota' iota zeta A lambda` into derivative space.
    pub reduced: DifferentialOperator<T>,
    pub multi_indices: Vec<MultiIndex>,
    /// `P` (`l x N #alpha`), with `P D^m v = A v`.
    pub gradient_map: DMatrix<T>,
    /// `pi_{A~}` (`N #alpha x N #alpha`), with `pi(D^m v) = A~ v`.
    pub projection: DMatrix<T>,
    /// `U_d`: orthonormal basis of `R(A)` inside W.
    pub range_basis: DMatrix<T>,
    /// `V_d`: image of `U_d` under `kappa`.
    pub kappa_basis: DMatrix<T>,
    /// Orthonormal basis of `kappa(R(A))^perp`, the image of `kappa'`.
    pub kappa_complement: DMatrix<T>,
    pub singular_values: Vec<T>,
}

/// Builds the identification for an operator of any order.
pub fn reduce_to_gradient_form<T: Real>(op: &DifferentialOperator<T>) -> Result<GradientReduction<T>> {
    let alphas = op.multi_indices();
    let na = alphas.len();
    let big_n = op.dim_v();
    let l = op.dim_w();
    let k = big_n * na;
    let mut p = DMatrix::zeros(l, k);
    for (a, alpha) in alphas.iter().enumerate() {
        if let Some(m) = op.coefficient(alpha) {
            for c in 0..big_n {
                p.set_column(c * na + a, &m.column(c));
            }
        }
    }
    let dec = linalg::svd(&p);
    let d = linalg::rank(&dec.singular_values, T::tol(RANK_TOL));
    let u_d = dec.left.columns(0, d).clone_owned();
    let v_d = dec.right.columns(0, d).clone_owned();
    let v_rest = dec.right.columns(d, k - d).clone_owned();
    let sigma: Vec<T> = dec.singular_values[..d].to_vec();

    let embed = &v_d * u_d.transpose();
    let coeffs: Vec<(MultiIndex, DMatrix<T>)> = alphas
        .iter()
        .map(|alpha| {
            let m = op
                .coefficient(alpha)
                .cloned()
                .unwrap_or_else(|| DMatrix::zeros(l, big_n));
            (alpha.clone(), &embed * m)
        })
        .collect();
    let reduced = DifferentialOperator::new(
        Some(format!("{}~", op.label())),
        op.n(),
        big_n,
        k,
        op.order(),
        coeffs,
    )?;
    let mut projection = DMatrix::zeros(k, k);
    for (a, alpha) in alphas.iter().enumerate() {
        if let Some(m) = reduced.coefficient(alpha) {
            for c in 0..big_n {
                projection.set_column(c * na + a, &m.column(c));
            }
        }
    }
    Ok(GradientReduction {
        reduced,
        multi_indices: alphas,
        gradient_map: p,
        projection,
        range_basis: u_d,
        kappa_basis: v_d,
        kappa_complement: v_rest,
        singular_values: sigma,
    })
}

impl<T: Real> GradientReduction<T> {
    pub fn range_dim(&self) -> usize {
        self.range_basis.ncols()
    }

    /// Codimension of `kappa(R(A))` in derivative space.
    pub fn codim(&self) -> usize {
        self.kappa_complement.ncols()
    }

    /// `kappa: R(A) -> derivative space`, an isometry. Components of `w`
    /// outside `R(A)` are discarded.
    pub fn kappa(&self, w: &DVector<T>) -> DVector<T> {
        &self.kappa_basis * (self.range_basis.transpose() * w)
    }

    /// `kappa': R^codim -> kappa(R(A))^perp`.
    pub fn kappa_prime(&self, c: &DVector<T>) -> DVector<T> {
        &self.kappa_complement * c
    }

    /// `iota(w, c) = kappa(w) + kappa'(c)`.
    pub fn iota(&self, w: &DVector<T>, c: &DVector<T>) -> DVector<T> {
        self.kappa(w) + self.kappa_prime(c)
    }

    /// Inverse of `iota`: returns `(w, c)` with `w` in `R(A) ⊂ W`.
    pub fn iota_inv(&self, z: &DVector<T>) -> (DVector<T>, DVector<T>) {
        (
            &self.range_basis * (self.kappa_basis.transpose() * z),
            self.kappa_complement.transpose() * z,
        )
    }

    /// `zeta(w) = (w, 0)`.
    pub fn zeta(&self, w: &DVector<T>) -> (DVector<T>, DVector<T>) {
        (w.clone(), DVector::zeros(self.codim()))
    }

    /// `lambda`: coordinates in R^N to V (identity for the standard basis).
    pub fn lambda(&self, v: &DVector<T>) -> DVector<T> {
        v.clone()
    }

    pub fn lambda_inv(&self, v: &DVector<T>) -> DVector<T> {
        v.clone()
    }

    pub fn pi(&self, z: &DVector<T>) -> DVector<T> {
        &self.projection * z
    }

    /// `proj_1 iota^{-1} (iota')^{-1} pi(z)`: the element of W seen by the
    /// original integrand. Equals `gradient_map * z`.
    pub fn to_target(&self, z: &DVector<T>) -> DVector<T> {
        self.iota_inv(&self.pi(z)).0
    }

    /// Plane-wave derivative tensor `v (x) (xi^alpha)_alpha` in derivative space.
    pub fn derivative_tensor(&self, v: &[T], xi: &[T]) -> DVector<T> {
        let na = self.multi_indices.len();
        DVector::from_fn(v.len() * na, |i, _| {
            v[i / na] * self.multi_indices[i % na].monomial(xi)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::*;
    use rand::Rng as _;

    fn random_vec(rng: &mut crate::rng::Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn symmetric_gradient_projection_is_symmetrization() {
        let r = reduce_to_gradient_form(&symmetric_gradient::<f64>(2)).unwrap();
        let p = &r.projection;
        assert!((p * p - p).norm() < 1e-12);
        assert_eq!(r.range_dim(), 3);
        let z = DVector::from_column_slice(&[1.0, 2.0, 4.0, 3.0]);
        let sym = DVector::from_column_slice(&[1.0, 3.0, 3.0, 3.0]);
        assert!((r.pi(&z) - sym).norm() < 1e-12);
    }

    #[test]
    fn tracefree_projection() {
        let r = reduce_to_gradient_form(&tracefree_symmetric_gradient::<f64>(2)).unwrap();
        let p = &r.projection;
        assert!((p * p - p).norm() < 1e-12);
        assert_eq!(r.range_dim(), 2);
        assert!((p.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_projection_is_identity() {
        let r = reduce_to_gradient_form(&gradient::<f64>(3, 2)).unwrap();
        assert!((&r.projection - DMatrix::identity(6, 6)).norm() < 1e-12);
        assert_eq!(r.codim(), 0);
    }

    #[test]
    fn connections_hold_on_plane_waves() {
        let mut rng = crate::rng::stream(7, 0);
        for op in builtin_catalog::<f64>() {
            let r = reduce_to_gradient_form(&op).unwrap();
            for _ in 0..10 {
                let v = random_vec(&mut rng, op.dim_v());
                let xi = random_vec(&mut rng, op.n());
                let dz = r.derivative_tensor(&v, &xi);
                let a_v = op.pure_tensor(&v, &xi).unwrap();
                let at_v = r.reduced.pure_tensor(&v, &xi).unwrap();
                assert!((r.pi(&dz) - at_v).norm() < 1e-10, "{}", op.label());
                assert!((r.to_target(&dz) - &a_v).norm() < 1e-10, "{}", op.label());
                assert!((&r.gradient_map * &dz - a_v).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn iota_roundtrip() {
        let r = reduce_to_gradient_form(&div_curl::<f64>()).unwrap();
        let mut rng = crate::rng::stream(8, 0);
        let z = DVector::from_vec(random_vec(&mut rng, 9));
        let (w, c) = r.iota_inv(&z);
        assert!((r.iota(&w, &c) - &z).norm() < 1e-12);
        let (w0, c0) = r.zeta(&w);
        assert_eq!(c0.len(), r.codim());
        assert!((r.kappa(&w0).norm() - w.norm()).abs() < 1e-12);
    }
}
