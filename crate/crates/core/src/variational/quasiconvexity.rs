use serde::Serialize;

use super::integrand::{check_integrand_dim, Integrand};
use super::tree_sum;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::nfunctions::NFunction;
use crate::operators::{check_ellipticity, default_sphere_samples, reduce_to_gradient_form, DifferentialOperator};
use crate::scalar::{norm, Real};
use crate::spectral;

/// A sampled check can only refute: a positive constant is consistent with
/// the hypothesis, a nonpositive sample violates it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "consistent-with")]
    ConsistentWith,
    #[serde(rename = "violates")]
    Violates,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiconvexityWitness {
    pub z: Vec<f64>,
    pub field_index: usize,
    pub increment: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiconvexityReport {
    pub integrand: String,
    pub operator: String,
    pub verdict: Verdict,
    /// `inf int F(z + A phi) - F(z) / int (1 + |z|^2 + |A phi|^2)^{(p-2)/2} |A phi|^2`.
    pub nu: f64,
    /// For `p >= 2`: the infimum against `int |A phi|^2 + |A phi|^p`.
    pub nu_power: Option<f64>,
    pub witness: QuasiconvexityWitness,
    pub samples: usize,
}

fn image<T: Real>(op: &DifferentialOperator<T>, phi: &GridField<f64>) -> Result<GridField<f64>> {
    spectral::apply_operator(&op.cast::<f64>(), phi)
}

/// Sampled strong quasiconvexity of `F` in the directions `A phi`: for each
/// `z` in `zs` and test field `phi` (periodic on the unit cell) compares the
/// energy increment with the weighted Dirichlet term.
pub fn test_strong_quasiconvexity<T: Real>(
    f: &dyn Integrand,
    op: &DifferentialOperator<T>,
    zs: &[Vec<f64>],
    phis: &[GridField<f64>],
) -> Result<QuasiconvexityReport> {
    check_integrand_dim(f, op.dim_w())?;
    if zs.is_empty() || phis.is_empty() {
        return Err(Error::InvalidArgument("need at least one z and one test field".into()));
    }
    let p = f.exponent();
    let l = op.dim_w();
    let mut best: Option<(f64, QuasiconvexityWitness)> = None;
    let mut nu_power = f64::INFINITY;
    for (k, phi) in phis.iter().enumerate() {
        let a = image(op, phi)?;
        let pts = a.points();
        let vol = a.cell_volume();
        let (av, uv) = (a.values(), phi.values());
        let big_n = phi.components();
        let at = |q: usize| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let w: Vec<f64> = (0..l).map(|c| av[c * pts + q]).collect();
            let y: Vec<f64> = (0..big_n).map(|c| uv[c * pts + q]).collect();
            (phi.coordinate(q), y, w)
        };
        for z in zs {
            if z.len() != l {
                return Err(Error::DimensionMismatch { context: "z sample vs dim W", expected: l, found: z.len() });
            }
            let z2: f64 = z.iter().map(|v| v * v).sum();
            let increment = tree_sum(pts, |q| {
                let (x, y, w) = at(q);
                let zw: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + b).collect();
                f.value(&x, &y, &zw) - f.value(&x, &y, z)
            }) * vol;
            let weight = tree_sum(pts, |q| {
                let (_, _, w) = at(q);
                let w2: f64 = w.iter().map(|v| v * v).sum();
                (1.0 + z2 + w2).powf((p - 2.0) / 2.0) * w2
            }) * vol;
            if !(weight > 0.0) {
                return Err(Error::ZeroField);
            }
            let ratio = increment / weight;
            if p >= 2.0 {
                let power = tree_sum(pts, |q| {
                    let (_, _, w) = at(q);
                    let r = norm(&w);
                    r * r + r.powf(p)
                }) * vol;
                nu_power = nu_power.min(increment / power);
            }
            if best.as_ref().is_none_or(|(b, _)| ratio < *b) {
                best = Some((ratio, QuasiconvexityWitness { z: z.clone(), field_index: k, increment, weight }));
            }
        }
    }
    let (nu, witness) = best.expect("at least one sample");
    Ok(QuasiconvexityReport {
        integrand: f.label(),
        operator: op.label(),
        verdict: if nu > 0.0 { Verdict::ConsistentWith } else { Verdict::Violates },
        nu,
        nu_power: (p >= 2.0).then_some(nu_power),
        witness,
        samples: zs.len() * phis.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftedKornGroup {
    /// `|z|` of the samples in this group.
    pub z_norm: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftedKornReport {
    pub operator: String,
    pub p: f64,
    /// Largest sampled `int Psi_a(|D^m phi|) / int Psi_a(|A phi|)`, `a = |pi_A z|`.
    pub mu: f64,
    pub groups: Vec<ShiftedKornGroup>,
    /// Ratio of the largest to the smallest group maximum.
    pub uniformity: f64,
    pub samples: usize,
}

/// Shifted Korn inequality with `Psi(t) = (1 + t)^{p-2} t^2` shifted by
/// `a = |pi_A(z)|`, for `z` in the full derivative space. Samples are grouped
/// by `|z|` to measure how the constant depends on the shift.
pub fn test_shifted_korn_chain<T: Real>(
    op: &DifferentialOperator<T>,
    p: f64,
    zs: &[Vec<f64>],
    phis: &[GridField<f64>],
) -> Result<ShiftedKornReport> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::InvalidArgument(format!("shifted Korn chain needs 1 < p < 2, got {p}")));
    }
    if zs.is_empty() || phis.is_empty() {
        return Err(Error::InvalidArgument("need at least one z and one test field".into()));
    }
    let op = op.cast::<f64>();
    let ell = check_ellipticity(&op, default_sphere_samples(op.n()))?;
    if !ell.elliptic {
        return Err(Error::NonElliptic { xi: ell.witness_xi.clone(), sigma: ell.min_sigma });
    }
    let red = reduce_to_gradient_form(&op)?;
    let k = red.projection.ncols();
    let fields: Vec<(Vec<f64>, Vec<f64>, f64)> = phis
        .iter()
        .map(|phi| {
            let spec = spectral::forward(phi);
            let du = spectral::derivatives_from_spectrum(&spec, op.order());
            let au = spectral::inverse(&spectral::apply_operator_spectrum(&op, &spec)?);
            Ok((du.pointwise_norms(), au.pointwise_norms(), phi.cell_volume()))
        })
        .collect::<Result<_>>()?;
    let psi = NFunction::psi_aux(p)?;
    let mut groups: Vec<ShiftedKornGroup> = Vec::new();
    let mut mu: f64 = 0.0;
    for z in zs {
        if z.len() != k {
            return Err(Error::DimensionMismatch { context: "z sample vs derivative space", expected: k, found: z.len() });
        }
        let a = red.pi(&nalgebra::DVector::from_column_slice(z)).norm();
        let shifted = psi.shift(a)?;
        let zn = norm(z);
        let mut group_max: f64 = 0.0;
        for (du, au, vol) in &fields {
            let lhs = tree_sum(du.len(), |q| shifted.value(du[q])) * vol;
            let rhs = tree_sum(au.len(), |q| shifted.value(au[q])) * vol;
            if !(rhs > 0.0) {
                return Err(Error::ZeroField);
            }
            group_max = group_max.max(lhs / rhs);
        }
        mu = mu.max(group_max);
        match groups.iter_mut().find(|g| (g.z_norm - zn).abs() <= 1e-9 * (1.0 + zn)) {
            Some(g) => g.max_ratio = g.max_ratio.max(group_max),
            None => groups.push(ShiftedKornGroup { z_norm: zn, max_ratio: group_max }),
        }
    }
    let hi = groups.iter().map(|g| g.max_ratio).fold(0.0, f64::max);
    let lo = groups.iter().map(|g| g.max_ratio).fold(f64::INFINITY, f64::min);
    Ok(ShiftedKornReport {
        operator: op.label(),
        p,
        mu,
        groups,
        uniformity: hi / lo,
        samples: zs.len() * phis.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipliers::korn_modular_ratio;
    use crate::operators::*;
    use crate::variational::*;

    #[test]
    fn quadratic_increment_is_the_dirichlet_term() {
        let op = symmetric_gradient::<f64>(2);
        let zs = range_samples(&op, &[0.0, 1.0, 5.0], 3, 0);
        let phis = localized_test_fields(&[16, 16], 2, 4, 1).unwrap();
        let r = test_strong_quasiconvexity(&VpIntegrand::new(2.0).unwrap(), &op, &zs, &phis).unwrap();
        assert_eq!(r.verdict, Verdict::ConsistentWith);
        assert!((r.nu - 1.0).abs() < 1e-12, "{}", r.nu);
    }

    #[test]
    fn determinant_toy_has_nu_mu() {
        let op = gradient::<f64>(2, 2);
        let zs = range_samples(&op, &[0.0, 1.0, 3.0], 4, 2);
        let phis = localized_test_fields(&[16, 16], 2, 4, 3).unwrap();
        let mu = 0.3;
        let r = test_strong_quasiconvexity(&DetPlusVp::new(mu, 2.0).unwrap(), &op, &zs, &phis).unwrap();
        assert!(r.nu >= mu * (1.0 - 1e-9), "{}", r.nu);
        assert!(r.nu <= mu * (1.0 + 1e-9));
    }

    #[test]
    fn concave_integrand_is_a_violation() {
        let op = symmetric_gradient::<f64>(2);
        let zs = range_samples(&op, &[1.0], 2, 0);
        let phis = localized_test_fields(&[16, 16], 2, 2, 1).unwrap();
        let r = test_strong_quasiconvexity(&ConcaveQuadratic, &op, &zs, &phis).unwrap();
        assert_eq!(r.verdict, Verdict::Violates);
        assert!(r.witness.increment < 0.0);
    }

    #[test]
    fn shifted_chain_for_gradient_is_one() {
        let op = gradient::<f64>(2, 2);
        let zs = sphere_samples(4, &[0.0, 1.0, 100.0], 2, 0);
        let phis = localized_test_fields(&[16, 16], 2, 2, 1).unwrap();
        let r = test_shifted_korn_chain(&op, 1.5, &zs, &phis).unwrap();
        assert!((r.mu - 1.0).abs() < 1e-12);
        assert!((r.uniformity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_chain_near_two_matches_quadratic_korn() {
        let op = symmetric_gradient::<f64>(2);
        let phis = localized_test_fields(&[16, 16], 2, 6, 7).unwrap();
        let zs = sphere_samples(4, &[0.0], 1, 0);
        let r = test_shifted_korn_chain(&op, 1.99, &zs, &phis).unwrap();
        let psi = NFunction::power(2.0).unwrap();
        let quad = phis
            .iter()
            .map(|f| korn_modular_ratio(&op, &psi, f).unwrap().ratio)
            .fold(0.0, f64::max);
        assert!((r.mu / quad - 1.0).abs() < 0.1, "{} vs {quad}", r.mu);
    }

    #[test]
    fn shifted_chain_rejects_non_elliptic() {
        let zs = sphere_samples(2, &[1.0], 1, 0);
        let phis = localized_test_fields(&[16, 16], 1, 1, 1).unwrap();
        let err = test_shifted_korn_chain(&partial::<f64>(2, 0), 1.5, &zs, &phis).unwrap_err();
        assert!(matches!(err, Error::NonElliptic { .. }));
    }
}
