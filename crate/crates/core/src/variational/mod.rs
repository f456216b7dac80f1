//! Integrands `F(x, u, A u)`, sampled hypothesis and quasiconvexity checks,
//! the reduction `G = F o pi_A` to full-gradient form, a discrete
//! direct-method minimizer and diagnostics for coercivity and regularity.
//!
//! Integrands and energies are evaluated in `f64`; entry points taking
//! operators or fields accept any [`Real`](crate::Real) and convert.

mod diagnostics;
mod energy;
mod hypotheses;
mod integrand;
mod lbfgs;
mod problem;
mod quasiconvexity;

pub use diagnostics::{
    coercivity_diagnostic, local_minimality, regularity_diagnostic, AmplitudeRow, CoercivityReport, LocalMinimalityReport,
    RegularityConfig, RegularityReport,
};
pub use energy::{minimize, Boundary, EnergyProblem, Minimization, SolverConfig};
pub use hypotheses::{check_hypotheses, HypothesisCheck, HypothesisReport, Witness};
pub use integrand::{
    reduce_integrand, BoundedIntegrand, ConcaveQuadratic, DetPlusVp, Integrand, Modulus, NonAutonomousVp,
    ReducedIntegrand, VpIntegrand,
};
pub use lbfgs::{lbfgs, LbfgsConfig, LbfgsResult};
pub use problem::{
    affine_datum, load_problem, sinusoidal_datum, DatumDef, DomainDef, GeneratedDatum, IntegrandDef, OperatorRef,
    ProblemDef, SolverDef,
};
pub use quasiconvexity::{
    test_shifted_korn_chain, test_strong_quasiconvexity, QuasiconvexityReport, QuasiconvexityWitness,
    ShiftedKornGroup, ShiftedKornReport, Verdict,
};

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::Result;
use crate::field::GridField;
use crate::operators::{essential_range, DifferentialOperator};
use crate::rng;
use crate::scalar::Real;
use crate::spectral;

const CHUNK: usize = 512;

/// `sum_{k < n} f(k)` evaluated in parallel over fixed chunks and combined
/// pairwise, so the result does not depend on the thread count.
pub(crate) fn tree_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    pairwise(&partial)
}

fn pairwise(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        len => pairwise(&v[..len / 2]) + pairwise(&v[len / 2..]),
    }
}

fn gaussian_unit(rng: &mut rng::Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = crate::scalar::norm(&v);
        if nrm > 1e-8 {
            return v.into_iter().map(|x| x / nrm).collect();
        }
    }
}

/// Random points of the essential range `R(A)`, `per_norm` for each
/// requested norm (a single zero vector for norm 0).
pub fn range_samples<T: Real>(
    op: &DifferentialOperator<T>,
    norms: &[f64],
    per_norm: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let basis = essential_range(&op.cast::<f64>()).basis;
    let mut rng = rng::stream(seed, 0x2a11);
    let mut out = Vec::new();
    for &r in norms {
        if r == 0.0 {
            out.push(vec![0.0; op.dim_w()]);
            continue;
        }
        for _ in 0..per_norm {
            let c = gaussian_unit(&mut rng, basis.ncols());
            let z = &basis * nalgebra::DVector::from_vec(c);
            out.push(z.iter().map(|v| v * r).collect());
        }
    }
    out
}

/// Random vectors of `R^dim` with the requested norms (zero once for norm 0).
pub fn sphere_samples(dim: usize, norms: &[f64], per_norm: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::stream(seed, 0x2a12);
    let mut out = Vec::new();
    for &r in norms {
        if r == 0.0 {
            out.push(vec![0.0; dim]);
            continue;
        }
        for _ in 0..per_norm {
            out.push(gaussian_unit(&mut rng, dim).into_iter().map(|v| v * r).collect());
        }
    }
    out
}

/// Periodic test fields localized by a smooth bump: band-limited noise times
/// a bump supported in the middle of the cell, normalized to unit L2 norm.
pub fn localized_test_fields(shape: &[usize], components: usize, count: usize, seed: u64) -> Result<Vec<GridField<f64>>> {
    let bump = spectral::bump::<f64>(shape, 0.45)?;
    (0..count)
        .map(|k| {
            let mut f = spectral::random_band_limited::<f64>(
                shape,
                components,
                spectral::default_cutoff(shape).min(4),
                1.0,
                rng::child(seed, k as u64),
            )?;
            let pts = f.points();
            for c in 0..components {
                for (v, b) in f.component_mut(c).iter_mut().zip(&bump.values()[..pts]) {
                    *v *= b;
                }
            }
            let nrm = f.l2_norm();
            if nrm > 0.0 {
                f.scale(1.0 / nrm);
            }
            f.mean_zero = false;
            Ok(f)
        })
        .collect()
}
