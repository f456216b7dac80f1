use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{DifferentialOperator, RANK_TOL};
use crate::linalg;
use crate::rng;
use crate::scalar::Real;

/// Orthonormal basis of the essential range `R(A)`, the span of all pure
/// tensors `A[xi] v`, and the orthogonal projector onto it.
#[derive(Clone, Debug, Serialize)]
pub struct RangeDecomposition<T: Real> {
    /// `l x dim` with orthonormal columns.
    pub basis: DMatrix<T>,
    pub dim: usize,
    /// `l x l`.
    pub projector: DMatrix<T>,
}

impl<T: Real> RangeDecomposition<T> {
    pub fn project(&self, w: &DVector<T>) -> DVector<T> {
        &self.projector * w
    }
}

const RANGE_SEED: u64 = 0x5eed_0a11;

/// Assembles pure tensors over the basis of V at the coordinate frequencies,
/// the multi-index frequencies and `2 N n` random frequencies, then extracts
/// an orthonormal basis of their span.
pub fn essential_range<T: Real>(op: &DifferentialOperator<T>) -> RangeDecomposition<T> {
    let n = op.n();
    let big_n = op.dim_v();
    let l = op.dim_w();
    let mut freqs: Vec<Vec<T>> = Vec::new();
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        freqs.push(e);
    }
    if op.order() > 1 {
        for alpha in op.multi_indices() {
            freqs.push(alpha.0.iter().map(|&a| T::lit(a as f64)).collect());
        }
    }
    let mut rng = rng::stream(RANGE_SEED, 0);
    for _ in 0..(2 * big_n * n) {
        freqs.push(
            (0..n)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    T::lit(g)
                })
                .collect(),
        );
    }
    let mut tensors = DMatrix::zeros(l, freqs.len() * big_n);
    for (f, xi) in freqs.iter().enumerate() {
        let s = op.symbol_matrix_unchecked(xi);
        // Normalize per frequency so no direction dominates the rank decision.
        let scale = linalg::spectral_norm(&s);
        if scale > T::zero() {
            tensors
                .view_mut((0, f * big_n), (l, big_n))
                .copy_from(&(s / scale));
        }
    }
    let basis = linalg::column_space(&tensors, T::tol(RANK_TOL));
    let projector = &basis * basis.transpose();
    RangeDecomposition {
        dim: basis.ncols(),
        basis,
        projector,
    }
}
