//! Homogeneous constant-coefficient differential operators
//! `A = sum_{|alpha| = m} A_alpha d^alpha` from `V = R^N` to `W = R^l`,
//! together with their symbols, ellipticity and constant-rank checks, the
//! essential range and the identification with full-gradient form.

mod catalog;
mod definition;
mod ellipticity;
mod exactness;
mod range;
mod reduction;
mod symbol;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, MultiIndex};
use crate::scalar::Real;

pub use catalog::{builtin, builtin_catalog, curl, div_curl, divergence, exterior_derivative_pair,
    gradient, partial, saint_venant, split_laplace_beltrami, symmetric_gradient,
    tracefree_symmetric_gradient, BUILTIN_NAMES};
pub use definition::{CoefficientDef, OperatorDef};
pub use ellipticity::{check_ellipticity, default_sphere_samples, sphere_points, EllipticityReport};
pub use exactness::{check_exactness, ExactnessReport};
pub use range::{essential_range, RangeDecomposition};
pub use reduction::{reduce_to_gradient_form, GradientReduction};
pub use symbol::SymbolMatrix;

/// Relative singular-value threshold used for every rank decision.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialOperator<T: Real> {
    name: Option<String>,
    n: usize,
    dim_v: usize,
    dim_w: usize,
    order: u32,
    coeffs: BTreeMap<MultiIndex, DMatrix<T>>,
}

impl<T: Real> DifferentialOperator<T> {
    /// Builds an operator from `(alpha, A_alpha)` pairs. Repeated multi-indices
    /// are summed. The identically zero operator is allowed; it is simply
    /// never elliptic.
    pub fn new(
        name: Option<String>,
        n: usize,
        dim_v: usize,
        dim_w: usize,
        order: u32,
        coeffs: impl IntoIterator<Item = (MultiIndex, DMatrix<T>)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidOperator("spatial dimension must be at least 1".into()));
        }
        if order == 0 {
            return Err(Error::InvalidOperator("order must be at least 1".into()));
        }
        if dim_v == 0 || dim_w == 0 {
            return Err(Error::InvalidOperator("dim V and dim W must be positive".into()));
        }
        let mut map: BTreeMap<MultiIndex, DMatrix<T>> = BTreeMap::new();
        for (alpha, mat) in coeffs {
            if alpha.dim() != n {
                return Err(Error::DimensionMismatch {
                    context: "multi-index length",
                    expected: n,
                    found: alpha.dim(),
                });
            }
            if alpha.order() != order {
                return Err(Error::InvalidOperator(format!(
                    "multi-index {:?} has order {} but the operator is homogeneous of order {}",
                    alpha.0,
                    alpha.order(),
                    order
                )));
            }
            if mat.shape() != (dim_w, dim_v) {
                return Err(Error::InvalidOperator(format!(
                    "coefficient for {:?} has shape {:?}, expected ({dim_w}, {dim_v})",
                    alpha.0,
                    mat.shape()
                )));
            }
            match map.get_mut(&alpha) {
                Some(existing) => *existing += mat,
                None => {
                    map.insert(alpha, mat);
                }
            }
        }
        Ok(Self {
            name,
            n,
            dim_v,
            dim_w,
            order,
            coeffs: map,
        })
    }

    /// First-order operator from the list `A_1, ..., A_n`.
    pub fn first_order(name: &str, mats: Vec<DMatrix<T>>) -> Result<Self> {
        let n = mats.len();
        let (l, big_n) = mats
            .first()
            .map(|m| m.shape())
            .ok_or_else(|| Error::InvalidOperator("no coefficient matrices".into()))?;
        let coeffs = mats
            .into_iter()
            .enumerate()
            .map(|(j, m)| (MultiIndex::unit(n, j), m));
        Self::new(Some(name.to_string()), n, big_n, l, 1, coeffs)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "<anonymous>".to_string())
    }

    /// Spatial dimension `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `dim V`.
    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    /// `dim W`.
    pub fn dim_w(&self) -> usize {
        self.dim_w
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&MultiIndex, &DMatrix<T>)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> Option<&DMatrix<T>> {
        self.coeffs.get(alpha)
    }

    /// All multi-indices of order `m` in `n` variables, in the canonical order
    /// used for `D^m u` coordinates.
    pub fn multi_indices(&self) -> Vec<MultiIndex> {
        linalg::multi_indices(self.n, self.order)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|m| m.iter().all(|x| *x == T::zero()))
    }

    fn check_xi(&self, xi: &[T]) -> Result<()> {
        if xi.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "frequency vector",
                expected: self.n,
                found: xi.len(),
            });
        }
        Ok(())
    }

    /// The raw symbol matrix `A[xi] = sum xi^alpha A_alpha` (l x N).
    pub fn symbol_matrix(&self, xi: &[T]) -> Result<DMatrix<T>> {
        self.check_xi(xi)?;
        Ok(self.symbol_matrix_unchecked(xi))
    }

    pub(crate) fn symbol_matrix_unchecked(&self, xi: &[T]) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.dim_w, self.dim_v);
        for (alpha, mat) in &self.coeffs {
            let c = alpha.monomial(xi);
            if c != T::zero() {
                out += mat * c;
            }
        }
        out
    }

    /// Partial derivative of the symbol with respect to `xi_j`.
    pub(crate) fn symbol_derivative(&self, xi: &[T], j: usize) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.dim_w, self.dim_v);
        for (alpha, mat) in &self.coeffs {
            let c = alpha.monomial_derivative(xi, j);
            if c != T::zero() {
                out += mat * c;
            }
        }
        out
    }

    /// Symbol with singular-value metadata.
    pub fn symbol_at(&self, xi: &[T]) -> Result<SymbolMatrix<T>> {
        self.check_xi(xi)?;
        Ok(SymbolMatrix::from_matrix(xi.to_vec(), self.symbol_matrix_unchecked(xi)))
    }

    /// The pure tensor `v (x)_A xi = A[xi] v`.
    pub fn pure_tensor(&self, v: &[T], xi: &[T]) -> Result<DVector<T>> {
        self.check_xi(xi)?;
        if v.len() != self.dim_v {
            return Err(Error::DimensionMismatch {
                context: "vector in V",
                expected: self.dim_v,
                found: v.len(),
            });
        }
        Ok(self.symbol_matrix_unchecked(xi) * DVector::from_column_slice(v))
    }

    /// `||A|| = sum_alpha |A_alpha|` with the spectral norm on L(V; W).
    pub fn operator_norm(&self) -> T {
        self.coeffs
            .values()
            .fold(T::zero(), |acc, m| acc + linalg::spectral_norm(m))
    }

    /// Applies the coefficients to a list of derivative values: given
    /// `d^alpha u` for every multi-index (in `multi_indices()` order, each a
    /// vector in V), returns `A u` at that point.
    pub fn apply_to_derivatives(&self, derivs: &[DVector<T>]) -> DVector<T> {
        let mut out = DVector::zeros(self.dim_w);
        for (alpha, d) in self.multi_indices().iter().zip(derivs) {
            if let Some(mat) = self.coeffs.get(alpha) {
                out += mat * d;
            }
        }
        out
    }

    /// The operator `u -> (b_1 A_1 u, ..., b_k A_k u)` stacked into
    /// `W_1 x ... x W_k`. All parts must share `n`, `V` and the order.
    pub fn stack(name: &str, parts: &[(T, &DifferentialOperator<T>)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidOperator("nothing to stack".into()))?;
        let (n, dim_v, order) = (first.n, first.dim_v, first.order);
        for (_, p) in parts {
            if p.n != n || p.dim_v != dim_v || p.order != order {
                return Err(Error::InvalidOperator(
                    "stacked operators must share n, dim V and order".into(),
                ));
            }
        }
        let dim_w: usize = parts.iter().map(|(_, p)| p.dim_w).sum();
        let coeffs = linalg::multi_indices(n, order).into_iter().map(|alpha| {
            let mut mat = DMatrix::zeros(dim_w, dim_v);
            let mut row = 0;
            for (b, p) in parts {
                if let Some(c) = p.coeffs.get(&alpha) {
                    mat.view_mut((row, 0), (p.dim_w, dim_v)).copy_from(&(c * *b));
                }
                row += p.dim_w;
            }
            (alpha, mat)
        });
        Self::new(Some(name.to_string()), n, dim_v, dim_w, order, coeffs)
    }

    /// The composition `B A` (apply `A` first), of order `m_A + m_B`.
    pub fn compose(name: &str, b: &DifferentialOperator<T>, a: &DifferentialOperator<T>) -> Result<Self> {
        if b.n != a.n || b.dim_v != a.dim_w {
            return Err(Error::InvalidOperator(
                "composition requires matching n and W_A = V_B".into(),
            ));
        }
        let mut coeffs = Vec::new();
        for (beta, bm) in &b.coeffs {
            for (alpha, am) in &a.coeffs {
                coeffs.push((beta.add(alpha), bm * am));
            }
        }
        Self::new(Some(name.to_string()), a.n, a.dim_v, b.dim_w, a.order + b.order, coeffs)
    }

    /// Converts the coefficients to another scalar type.
    pub fn cast<U: Real>(&self) -> DifferentialOperator<U> {
        DifferentialOperator {
            name: self.name.clone(),
            n: self.n,
            dim_v: self.dim_v,
            dim_w: self.dim_w,
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, m)| (a.clone(), m.map(|x| U::lit(x.as_f64()))))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inhomogeneous_coefficients() {
        let err = DifferentialOperator::<f64>::new(
            None,
            2,
            1,
            1,
            1,
            vec![(MultiIndex(vec![1, 1]), DMatrix::from_element(1, 1, 1.0))],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidOperator(_)));
    }

    #[test]
    fn rejects_wrong_shape() {
        let err = DifferentialOperator::<f64>::new(
            None,
            2,
            2,
            1,
            1,
            vec![(MultiIndex::unit(2, 0), DMatrix::from_element(1, 1, 1.0))],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidOperator(_)));
    }

    #[test]
    fn symbol_dimension_mismatch() {
        let op = symmetric_gradient::<f64>(2);
        assert!(matches!(op.symbol_at(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(op.pure_tensor(&[1.0], &[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pure_tensor_examples() {
        let eps = symmetric_gradient::<f64>(2);
        let t = eps.pure_tensor(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(t.as_slice(), &[0.0, 0.5, 0.5, 0.0]);
        let t = eps.pure_tensor(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(t.as_slice(), &[0.0, 0.5, 0.5, 0.0]);

        let c = curl::<f64>(3);
        let t = c.pure_tensor(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.norm(), 0.0);

        let dc = div_curl::<f64>();
        let t = dc.pure_tensor(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn operator_norm_examples() {
        assert!((gradient::<f64>(2, 1).operator_norm() - 2.0).abs() < 1e-12);
        assert!((symmetric_gradient::<f64>(2).operator_norm() - 2.0).abs() < 1e-12);
        let three_id = DifferentialOperator::first_order(
            "3id",
            vec![DMatrix::<f64>::identity(2, 2) * 3.0, DMatrix::zeros(2, 2)],
        )
        .unwrap();
        assert!((three_id.operator_norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_gradient_norm_matches_svd_oracle() {
        // max over unit v of |v (.) e_j|, brute force over the circle.
        let mut best: f64 = 0.0;
        for k in 0..20_000 {
            let t = k as f64 * std::f64::consts::TAU / 20_000.0;
            let v = [t.cos(), t.sin()];
            let m = [[v[0], 0.5 * v[1]], [0.5 * v[1], 0.0]];
            let f = (m.iter().flatten().map(|x| x * x).sum::<f64>()).sqrt();
            best = best.max(f);
        }
        assert!((best - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stack_and_compose_shapes() {
        let eps = symmetric_gradient::<f64>(2);
        let dup = DifferentialOperator::stack("dup", &[(2.0, &eps), (-1.0, &eps)]).unwrap();
        assert_eq!(dup.dim_w(), 8);
        let d = divergence::<f64>(2);
        let g = gradient::<f64>(2, 1);
        let lap = DifferentialOperator::compose("lap", &d, &g).unwrap();
        assert_eq!(lap.order(), 2);
        let s = lap.symbol_matrix(&[3.0, 4.0]).unwrap();
        assert!((s[(0, 0)] - 25.0).abs() < 1e-12);
    }

    #[test]
    fn cast_preserves_symbol() {
        let op = div_curl::<f64>();
        let op32: DifferentialOperator<f32> = op.cast();
        let s = op32.symbol_matrix(&[0.3, -0.2, 0.9]).unwrap();
        let s64 = op.symbol_matrix(&[0.3, -0.2, 0.9]).unwrap();
        for (a, b) in s.iter().zip(s64.iter()) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }
}
