//! Small dense linear-algebra helpers: multi-indices, monomials and
//! SVD-derived quantities (ranks, orthonormal bases, kernel vectors).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A multi-index `alpha` in N_0^n.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn unit(n: usize, j: usize) -> Self {
        let mut a = vec![0; n];
        a[j] = 1;
        MultiIndex(a)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `xi^alpha`.
    pub fn monomial<T: Real>(&self, xi: &[T]) -> T {
        self.0
            .iter()
            .zip(xi)
            .fold(T::one(), |acc, (&a, &x)| acc * x.powi(a as i32))
    }

    /// Partial derivative of `xi^alpha` with respect to `xi_j`.
    pub fn monomial_derivative<T: Real>(&self, xi: &[T], j: usize) -> T {
        let aj = self.0[j];
        if aj == 0 {
            return T::zero();
        }
        let mut reduced = self.clone();
        reduced.0[j] -= 1;
        T::lit(aj as f64) * reduced.monomial(xi)
    }

    /// Sum of two multi-indices.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `alpha!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(f64::from).product::<f64>())
            .product()
    }
}

/// All multi-indices of exact order `m` in `n` variables, ordered so that the
/// first variable carries the largest power first. For `m = 1` this is
/// `e_1, ..., e_n`.
pub fn multi_indices(n: usize, m: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, m: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == n {
            prefix.push(m);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=m).rev() {
            prefix.push(a);
            rec(n, m - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(n, m, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Singular values (descending, padded with zeros to the column count) and
/// the full set of right singular vectors of a matrix.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    pub singular_values: Vec<T>,
    /// Columns are right singular vectors, matching `singular_values`.
    pub right: DMatrix<T>,
    /// Columns are left singular vectors for the leading `min(rows, cols)` values.
    pub left: DMatrix<T>,
}

pub fn svd<T: Real>(mat: &DMatrix<T>) -> Svd<T> {
    let (rows, cols) = mat.shape();
    // Pad to at least square so that the right factor spans all of R^cols.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(mat);
        p
    } else {
        mat.clone()
    };
    let dec = padded.svd(true, true);
    let u = dec.u.expect("u requested");
    let vt = dec.v_t.expect("v_t requested");
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        dec.singular_values[b]
            .partial_cmp(&dec.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let singular_values: Vec<T> = order.iter().map(|&i| dec.singular_values[i]).collect();
    let right = DMatrix::from_fn(cols, k, |r, c| vt[(order[c], r)]);
    let kept = rows.min(cols);
    let left = DMatrix::from_fn(rows, kept, |r, c| u[(r, order[c])]);
    Svd {
        singular_values,
        right,
        left,
    }
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank<T: Real>(singular_values: &[T], rel_tol: T) -> usize {
    let smax = singular_values.iter().fold(T::zero(), |a, &b| a.max(b));
    if smax <= T::zero() {
        return 0;
    }
    singular_values
        .iter()
        .filter(|&&s| s > rel_tol * smax)
        .count()
}

/// Orthonormal basis (as columns) of the column space of `mat`.
pub fn column_space<T: Real>(mat: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    let (rows, cols) = mat.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let dec = mat.clone().svd(true, false);
    let u = dec.u.expect("u requested");
    let smax = dec.singular_values.iter().fold(T::zero(), |a, &b| a.max(b));
    let keep: Vec<usize> = (0..dec.singular_values.len())
        .filter(|&i| smax > T::zero() && dec.singular_values[i] > rel_tol * smax)
        .collect();
    DMatrix::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

/// Spectral norm.
pub fn spectral_norm<T: Real>(mat: &DMatrix<T>) -> T {
    if mat.is_empty() {
        return T::zero();
    }
    mat.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |a, &b| a.max(b))
}

pub fn to_dvector<T: Real>(v: &[T]) -> DVector<T> {
    DVector::from_column_slice(v)
}
