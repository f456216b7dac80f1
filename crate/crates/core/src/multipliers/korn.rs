use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::nfunctions::NFunction;
use crate::operators::{curl, DifferentialOperator};
use crate::scalar::Real;
use crate::spectral;

#[derive(Clone, Debug, Serialize)]
pub struct KornRatio {
    /// `int psi(|D^m u|)`.
    pub lhs: f64,
    /// `int psi(|A u|)`.
    pub rhs: f64,
    pub ratio: f64,
}

fn check_field<T: Real>(op: &DifferentialOperator<T>, field: &GridField<T>) -> Result<()> {
    if field.components() != op.dim_v() {
        return Err(Error::DimensionMismatch {
            context: "field components vs dim V",
            expected: op.dim_v(),
            found: field.components(),
        });
    }
    if field.n() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "grid dimension vs operator dimension",
            expected: op.n(),
            found: field.n(),
        });
    }
    Ok(())
}

/// `D^m u` and `A u` from one forward transform.
fn derivative_and_image<T: Real>(
    op: &DifferentialOperator<T>,
    field: &GridField<T>,
) -> Result<(GridField<T>, GridField<T>)> {
    let spec = spectral::forward(field);
    let du = spectral::derivatives_from_spectrum(&spec, op.order());
    let au = spectral::inverse(&spectral::apply_operator_spectrum(op, &spec)?);
    Ok((du, au))
}

/// Grid quadratures of `psi(|D^m u|)` and `psi(|A u|)` with spectral
/// derivatives, where `|D^m u|^2 = sum_alpha |d^alpha u|^2`.
pub fn korn_modular_ratio<T: Real>(
    op: &DifferentialOperator<T>,
    psi: &NFunction,
    field: &GridField<T>,
) -> Result<KornRatio> {
    let mut out = korn_modular_ratios(op, std::slice::from_ref(psi), field)?;
    Ok(out.remove(0))
}

/// [`korn_modular_ratio`] for several `psi` sharing one transform.
pub fn korn_modular_ratios<T: Real>(
    op: &DifferentialOperator<T>,
    psis: &[NFunction],
    field: &GridField<T>,
) -> Result<Vec<KornRatio>> {
    check_field(op, field)?;
    let (du, au) = derivative_and_image(op, field)?;
    let (dn, an) = (du.pointwise_norms(), au.pointwise_norms());
    let vol = field.cell_volume();
    psis.iter()
        .map(|psi| {
            let lhs = dn.iter().map(|&r| psi.eval(r).as_f64()).sum::<f64>() * vol;
            let rhs = an.iter().map(|&r| psi.eval(r).as_f64()).sum::<f64>() * vol;
            if !(rhs > 0.0) {
                return Err(Error::ZeroField);
            }
            Ok(KornRatio { lhs, rhs, ratio: lhs / rhs })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedKornReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Sampled Muckenhoupt `A_q` constant of the weight over dyadic cubes.
    pub aq_constant: f64,
}

/// `int |D^m u|^q w / int |A u|^q w`.
pub fn weighted_korn_ratio<T: Real>(
    op: &DifferentialOperator<T>,
    q: f64,
    weight: &GridField<T>,
    field: &GridField<T>,
) -> Result<WeightedKornReport> {
    check_field(op, field)?;
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("exponent q must exceed 1, got {q}")));
    }
    if weight.components() != 1 || weight.shape() != field.shape() {
        return Err(Error::InvalidArgument("weight must be a scalar field on the field's grid".into()));
    }
    let wmin = weight.values().iter().fold(f64::INFINITY, |a, w| a.min(w.as_f64()));
    if !(wmin > 0.0) {
        return Err(Error::NonPositiveWeight(wmin));
    }
    let (du, au) = derivative_and_image(op, field)?;
    let w = weight.values();
    let weighted = |f: &GridField<T>| -> f64 {
        f.pointwise_norms()
            .iter()
            .zip(w)
            .map(|(r, wv)| r.as_f64().powf(q) * wv.as_f64())
            .sum::<f64>()
            * f.cell_volume()
    };
    let lhs = weighted(&du);
    let rhs = weighted(&au);
    if !(rhs > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(WeightedKornReport {
        lhs,
        rhs,
        ratio: lhs / rhs,
        aq_constant: muckenhoupt_constant(weight, q)?,
    })
}

/// `sup_Q (avg_Q w) (avg_Q w^{-1/(q-1)})^{q-1}` over all dyadic cubes of the
/// grid, from the whole torus down to single cells.
pub fn muckenhoupt_constant<T: Real>(weight: &GridField<T>, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("exponent q must exceed 1, got {q}")));
    }
    let shape = weight.shape().to_vec();
    let vals: Vec<f64> = weight.component(0).iter().map(|v| v.as_f64()).collect();
    if let Some(bad) = vals.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveWeight(*bad));
    }
    let levels = shape.iter().map(|s| s.trailing_zeros()).max().unwrap_or(0);
    let mut best = 0.0f64;
    for level in 0..=levels {
        let block: Vec<usize> = shape.iter().map(|&s| (s >> level).max(1)).collect();
        let counts: Vec<usize> = shape.iter().zip(&block).map(|(s, b)| s / b).collect();
        let cubes: usize = counts.iter().product();
        let mut sum_w = vec![0.0; cubes];
        let mut sum_s = vec![0.0; cubes];
        let mut size = vec![0usize; cubes];
        for (p, &wv) in vals.iter().enumerate() {
            let idx = weight.unravel(p);
            let cube = idx
                .iter()
                .zip(&block)
                .zip(&counts)
                .fold(0, |acc, ((&i, &b), &c)| acc * c + i / b);
            sum_w[cube] += wv;
            sum_s[cube] += wv.powf(-1.0 / (q - 1.0));
            size[cube] += 1;
        }
        for c in 0..cubes {
            let m = size[c] as f64;
            best = best.max((sum_w[c] / m) * (sum_s[c] / m).powf(q - 1.0));
        }
    }
    Ok(best)
}

/// Random divergence-free field on the 2- or 3-torus (`curl` of a random
/// band-limited potential), normalized to unit L2 norm. For these fields
/// `int |Du|^2 = 2 int |eps u|^2`.
pub fn solenoidal_field<T: Real>(shape: &[usize], cutoff: usize, seed: u64) -> Result<GridField<T>> {
    let n = shape.len();
    let mut u = match n {
        2 => {
            let phi = spectral::random_band_limited::<T>(shape, 1, cutoff, 1.0, seed)?;
            let d1 = spectral::derivative(&phi, &crate::MultiIndex::unit(2, 0))?;
            let d2 = spectral::derivative(&phi, &crate::MultiIndex::unit(2, 1))?;
            let mut vals = d2.into_values();
            vals.extend(d1.into_values().into_iter().map(|v| -v));
            GridField::new(shape.to_vec(), 2, vals)?
        }
        3 => {
            let a = spectral::random_band_limited::<T>(shape, 3, cutoff, 1.0, seed)?;
            spectral::apply_operator(&curl::<T>(3), &a)?
        }
        _ => return Err(Error::InvalidArgument(format!("solenoidal fields need n = 2 or 3, got {n}"))),
    };
    let nrm = u.l2_norm();
    if nrm > T::zero() {
        u.scale(T::one() / nrm);
    }
    u.mean_zero = true;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::*;
    use crate::spectral::random_band_limited;

    #[test]
    fn gradient_ratio_is_one() {
        let op = gradient::<f64>(2, 2);
        let u = random_band_limited::<f64>(&[16, 16], 2, 3, 1.0, 2).unwrap();
        for psi in ["power:2", "power:1.5", "vp:3"] {
            let r = korn_modular_ratio(&op, &NFunction::parse(psi).unwrap(), &u).unwrap();
            assert!((r.ratio - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn quadratic_korn_identity() {
        // int |Du|^2 = 2 int |eps u|^2 - int (div u)^2 for periodic fields.
        let eps = symmetric_gradient::<f64>(2);
        let div = divergence::<f64>(2);
        let psi = NFunction::power(2.0).unwrap();
        for seed in 0..5 {
            let u = random_band_limited::<f64>(&[16, 16], 2, 3, 1.0, seed).unwrap();
            let r = korn_modular_ratio(&eps, &psi, &u).unwrap();
            let d = crate::spectral::apply_operator(&div, &u).unwrap().integrate_norm(|x| x * x);
            assert!((r.lhs - (2.0 * r.rhs - d)).abs() < 1e-10 * r.lhs);
            assert!(r.ratio <= 2.0 + 1e-10);
        }
    }

    #[test]
    fn solenoidal_fields_saturate_quadratic_korn() {
        let eps = symmetric_gradient::<f64>(2);
        let u = solenoidal_field::<f64>(&[16, 16], 3, 4).unwrap();
        let r = korn_modular_ratio(&eps, &NFunction::power(2.0).unwrap(), &u).unwrap();
        assert!((r.ratio - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_field_is_an_error() {
        let u = GridField::<f64>::zeros(vec![8, 8], 2).unwrap();
        let err = korn_modular_ratio(&symmetric_gradient(2), &NFunction::power(2.0).unwrap(), &u);
        assert!(matches!(err, Err(Error::ZeroField)));
    }

    #[test]
    fn unit_weight_reduces_to_unweighted() {
        let op = symmetric_gradient::<f64>(2);
        let u = random_band_limited::<f64>(&[16, 16], 2, 3, 1.0, 9).unwrap();
        let w = GridField::from_fn(vec![16, 16], 1, |_, o| o[0] = 1.0).unwrap();
        let a = weighted_korn_ratio(&op, 2.0, &w, &u).unwrap();
        let b = korn_modular_ratio(&op, &NFunction::power(2.0).unwrap(), &u).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-12);
        assert!((a.aq_constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_must_be_positive() {
        let op = symmetric_gradient::<f64>(2);
        let u = random_band_limited::<f64>(&[8, 8], 2, 1, 1.0, 9).unwrap();
        let w = GridField::from_fn(vec![8, 8], 1, |x, o| o[0] = x[0]).unwrap();
        assert!(matches!(weighted_korn_ratio(&op, 2.0, &w, &u), Err(Error::NonPositiveWeight(_))));
    }

    #[test]
    fn muckenhoupt_constant_of_a_power_weight() {
        // |x - x0|^{1/2} is an A_2 weight; the sampled constant stays moderate.
        let w = GridField::<f64>::from_fn(vec![64, 64], 1, |x, o| {
            let d: f64 = x
                .iter()
                .map(|&xa| {
                    let t = (xa - 0.5 - 1.0 / 128.0).abs();
                    let t = t.min(1.0 - t);
                    t * t
                })
                .sum();
            o[0] = d.sqrt().sqrt();
        })
        .unwrap();
        let c = muckenhoupt_constant(&w, 2.0).unwrap();
        assert!(c > 1.0 && c < 3.0, "{c}");
    }
}
