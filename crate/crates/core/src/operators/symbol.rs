use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::RANK_TOL;
use crate::linalg;
use crate::scalar::Real;

/// The symbol `A[xi]` at one frequency together with its singular values.
#[derive(Clone, Debug, Serialize)]
pub struct SymbolMatrix<T: Real> {
    pub xi: Vec<T>,
    pub matrix: DMatrix<T>,
    /// Nonincreasing, padded with zeros to `N` entries so that the last
    /// value measures injectivity.
    pub singular_values: Vec<T>,
    pub rank: usize,
    #[serde(skip)]
    right: DMatrix<T>,
}

impl<T: Real> SymbolMatrix<T> {
    pub(crate) fn from_matrix(xi: Vec<T>, matrix: DMatrix<T>) -> Self {
        let dec = linalg::svd(&matrix);
        let rank = linalg::rank(&dec.singular_values, T::tol(RANK_TOL));
        Self {
            xi,
            matrix,
            singular_values: dec.singular_values,
            rank,
            right: dec.right,
        }
    }

    /// Smallest singular value as a map on V (zero when `l < N`).
    pub fn sigma_min(&self) -> T {
        self.singular_values.last().copied().unwrap_or_else(T::zero)
    }

    pub fn sigma_max(&self) -> T {
        self.singular_values.first().copied().unwrap_or_else(T::zero)
    }

    /// Unit vector `v` minimizing `|A[xi] v|`.
    pub fn min_right_vector(&self) -> DVector<T> {
        let k = self.right.ncols();
        self.right.column(k - 1).clone_owned()
    }

    pub fn apply(&self, v: &DVector<T>) -> DVector<T> {
        &self.matrix * v
    }
}

#[cfg(test)]
mod tests {
    use crate::operators::*;

    #[test]
    fn gradient_symbol_is_xi() {
        let g = gradient::<f64>(2, 1);
        let s = g.symbol_at(&[3.0, 4.0]).unwrap();
        assert_eq!(s.matrix.as_slice(), &[3.0, 4.0]);
        assert!((s.sigma_min() - 5.0).abs() < 1e-12);
        assert_eq!(s.rank, 1);
    }

    #[test]
    fn zero_frequency_is_zero_symbol() {
        for op in builtin_catalog::<f64>() {
            let s = op.symbol_at(&vec![0.0; op.n()]).unwrap();
            assert!(s.matrix.iter().all(|x| *x == 0.0), "{}", op.label());
            assert_eq!(s.rank, 0);
        }
    }

    #[test]
    fn symmetric_gradient_symbol_example() {
        let eps = symmetric_gradient::<f64>(2);
        let s = eps.symbol_at(&[1.0, 0.0]).unwrap();
        let v = nalgebra::DVector::from_column_slice(&[0.0, 1.0]);
        assert_eq!(s.apply(&v).as_slice(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn kernel_vector_of_curl() {
        let c = curl::<f64>(3);
        let s = c.symbol_at(&[0.0, 0.6, 0.8]).unwrap();
        let v = s.min_right_vector();
        assert!(s.apply(&v).norm() < 1e-12);
        assert!((v[1].abs() - 0.6).abs() < 1e-12);
    }
}
