use rayon::prelude::*;
use serde::Serialize;

use super::{essential_range, sphere_points, DifferentialOperator, RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Absolute tolerance on `|A'[xi] A[xi]|` at unit frequencies.
pub const COMPOSITION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct ExactnessReport<T: Real> {
    pub potential: String,
    pub annihilator: String,
    /// Composition vanishes and `ker A'[xi]` restricted to the essential range
    /// of the potential equals `im A[xi]` at every sample.
    pub exact: bool,
    /// Same, with the kernel taken in all of W.
    pub exact_on_full_target: bool,
    pub max_residual: T,
    pub failures: usize,
    pub first_failure: Option<Vec<T>>,
    pub samples: usize,
}

/// Checks that `V -A-> W -A'-> Z` is exact at W frequency by frequency.
pub fn check_exactness<T: Real>(
    potential: &DifferentialOperator<T>,
    annihilator: &DifferentialOperator<T>,
    sphere_samples: usize,
) -> Result<ExactnessReport<T>> {
    if potential.n() != annihilator.n() {
        return Err(Error::DimensionMismatch {
            context: "spatial dimension of annihilator",
            expected: potential.n(),
            found: annihilator.n(),
        });
    }
    if potential.dim_w() != annihilator.dim_v() {
        return Err(Error::DimensionMismatch {
            context: "target of potential vs domain of annihilator",
            expected: potential.dim_w(),
            found: annihilator.dim_v(),
        });
    }
    let basis = essential_range(potential).basis;
    let d = basis.ncols();
    let l = potential.dim_w();
    let tau = T::tol(RANK_TOL);
    let pts: Vec<Vec<T>> = sphere_points(potential.n(), sphere_samples);
    let rows: Vec<(T, bool, bool)> = pts
        .par_iter()
        .map(|xi| {
            let p = potential.symbol_matrix_unchecked(xi);
            let q = annihilator.symbol_matrix_unchecked(xi);
            let residual = (&q * &p).norm();
            let rank_p = linalg::rank(&linalg::svd(&p).singular_values, tau);
            let rank_qb = if d == 0 {
                0
            } else {
                linalg::rank(&linalg::svd(&(&q * &basis)).singular_values, tau)
            };
            let rank_q = linalg::rank(&linalg::svd(&q).singular_values, tau);
            let ok_res = residual <= T::lit(COMPOSITION_TOL);
            (residual, ok_res && d - rank_qb == rank_p, ok_res && l - rank_q == rank_p)
        })
        .collect();
    let max_residual = rows.iter().fold(T::zero(), |a, r| a.max(r.0));
    let failures = rows.iter().filter(|r| !r.1).count();
    let first_failure = rows.iter().position(|r| !r.1).map(|i| pts[i].clone());
    Ok(ExactnessReport {
        potential: potential.label(),
        annihilator: annihilator.label(),
        exact: failures == 0,
        exact_on_full_target: rows.iter().all(|r| r.2),
        max_residual,
        failures,
        first_failure,
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::*;

    #[test]
    fn gradient_and_scalar_curl() {
        let r = check_exactness(&gradient::<f64>(2, 1), &curl(2), 256).unwrap();
        assert!(r.exact && r.exact_on_full_target);
    }

    #[test]
    fn curl_and_divergence() {
        let r = check_exactness(&curl::<f64>(3), &divergence(3), 512).unwrap();
        assert!(r.exact && r.exact_on_full_target);
        assert!(r.max_residual <= 1e-12);
    }

    #[test]
    fn symmetric_gradient_and_saint_venant() {
        let r = check_exactness(&symmetric_gradient::<f64>(2), &saint_venant(2).unwrap(), 512).unwrap();
        assert!(r.exact);
        // skew matrices are annihilated but are not symmetric gradients
        assert!(!r.exact_on_full_target);
    }

    #[test]
    fn wrong_pair_is_not_exact() {
        // div grad = Laplacian does not vanish.
        let r = check_exactness(&gradient::<f64>(2, 1), &divergence(2), 64).unwrap();
        assert!(!r.exact);
        assert!(r.first_failure.is_some());
    }

    #[test]
    fn chain_mismatch() {
        let err = check_exactness(&gradient::<f64>(3, 1), &divergence(2), 64).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        let err = check_exactness(&gradient::<f64>(2, 2), &divergence(2), 64).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
