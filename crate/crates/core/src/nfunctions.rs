//! N-functions: powers, the radial profile of `V_p`, the auxiliary
//! `Psi(t) = (1+t)^{p-2} t^2`, their shifts `psi_a`, and sampled estimates of
//! the Delta_2 / nabla_2 constants and related comparison constants.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng;
use crate::scalar::Real;

const SHIFT_QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum NFunction {
    /// `scale * t^p`.
    Power { p: f64, scale: f64 },
    /// `(1 + t^2)^{p/2} - 1`.
    Vp { p: f64 },
    /// `(1 + t)^{p-2} t^2`.
    PsiAux { p: f64 },
    /// `psi_a(t) = int_0^t psi'(a + s) s / (a + s) ds`.
    Shifted { base: Box<NFunction>, a: f64 },
}

fn check_exponent(p: f64) -> Result<f64> {
    if p.is_finite() && p > 1.0 {
        Ok(p)
    } else {
        Err(Error::InvalidArgument(format!("N-function exponent must be > 1, got {p}")))
    }
}

fn binomial(x: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (x - j as f64) / (j as f64 + 1.0))
}

impl NFunction {
    pub fn power(p: f64) -> Result<Self> {
        Ok(NFunction::Power { p: check_exponent(p)?, scale: 1.0 })
    }

    /// `t^p / p`.
    pub fn power_normalized(p: f64) -> Result<Self> {
        Ok(NFunction::Power { p: check_exponent(p)?, scale: 1.0 / p })
    }

    pub fn vp(p: f64) -> Result<Self> {
        Ok(NFunction::Vp { p: check_exponent(p)? })
    }

    pub fn psi_aux(p: f64) -> Result<Self> {
        Ok(NFunction::PsiAux { p: check_exponent(p)? })
    }

    /// Parses `power:p[:scale]`, `vp:p`, `psi_aux:p` or `shifted:BASE:a`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::UnknownNFunction(spec.to_string());
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        if let Some(rest) = spec.strip_prefix("shifted:") {
            let (base, a) = rest.rsplit_once(':').ok_or_else(bad)?;
            return NFunction::parse(base)?.shift(num(a)?);
        }
        let parts: Vec<&str> = spec.split(':').collect();
        match parts.as_slice() {
            ["power", p] => NFunction::power(num(p)?),
            ["power", p, c] => {
                let scale = num(c)?;
                if scale <= 0.0 {
                    return Err(bad());
                }
                Ok(NFunction::Power { p: check_exponent(num(p)?)?, scale })
            }
            ["vp", p] => NFunction::vp(num(p)?),
            ["psi_aux", p] => NFunction::psi_aux(num(p)?),
            _ => Err(bad()),
        }
    }

    /// Growth exponent of the underlying family.
    pub fn exponent(&self) -> f64 {
        match self {
            NFunction::Power { p, .. } | NFunction::Vp { p } | NFunction::PsiAux { p } => *p,
            NFunction::Shifted { base, .. } => base.exponent(),
        }
    }

    pub fn shift(&self, a: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::NegativeShift(a));
        }
        Ok(NFunction::Shifted { base: Box::new(self.clone()), a })
    }

    pub fn value(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            NFunction::Power { p, scale } => scale * t.powf(*p),
            NFunction::Vp { p } => (0.5 * p * (t * t).ln_1p()).exp_m1(),
            NFunction::PsiAux { p } => (1.0 + t).powf(p - 2.0) * t * t,
            NFunction::Shifted { base, a } => shifted_value(base, *a, t),
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            NFunction::Power { p, scale } => {
                if t == 0.0 {
                    0.0
                } else {
                    scale * p * t.powf(p - 1.0)
                }
            }
            NFunction::Vp { p } => p * t * (1.0 + t * t).powf((p - 2.0) / 2.0),
            NFunction::PsiAux { p } => t * (1.0 + t).powf(p - 3.0) * (p * t + 2.0),
            NFunction::Shifted { base, a } => {
                if t == 0.0 {
                    0.0
                } else {
                    base.d1(a + t) * t / (a + t)
                }
            }
        }
    }

    /// `psi''(t)`; infinite at `t = 0` for powers with `p < 2`.
    pub fn d2(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            NFunction::Power { p, scale } => {
                if t == 0.0 {
                    if *p < 2.0 {
                        f64::INFINITY
                    } else if *p == 2.0 {
                        2.0 * scale
                    } else {
                        0.0
                    }
                } else {
                    scale * p * (p - 1.0) * t.powf(p - 2.0)
                }
            }
            NFunction::Vp { p } => p * (1.0 + t * t).powf((p - 4.0) / 2.0) * (1.0 + (p - 1.0) * t * t),
            NFunction::PsiAux { p } => {
                (1.0 + t).powf(p - 4.0) * (p * (p - 1.0) * t * t + 4.0 * (p - 1.0) * t + 2.0)
            }
            NFunction::Shifted { base, a } => {
                let s = a + t;
                if s == 0.0 {
                    return base.d2(0.0);
                }
                base.d2(s) * t / s + base.d1(s) * a / (s * s)
            }
        }
    }

    /// Generic-scalar evaluation of `psi`.
    pub fn eval<T: Real>(&self, t: T) -> T {
        T::lit(self.value(t.as_f64()))
    }

    /// `Delta_2` constant when known in closed form.
    pub fn delta2_analytic(&self) -> Option<f64> {
        match self {
            NFunction::Power { p, .. } => Some(2f64.powf(*p)),
            _ => None,
        }
    }

    /// `nabla_2` constant (Delta_2 of the conjugate) when known in closed form.
    pub fn nabla2_analytic(&self) -> Option<f64> {
        match self {
            NFunction::Power { p, .. } => Some(2f64.powf(p / (p - 1.0))),
            _ => None,
        }
    }

    /// Sampled check of `psi(0) = 0`, `psi'(0) = 0`, `psi'` positive and
    /// nondecreasing on `(0, hi]`.
    pub fn is_admissible(&self, hi: f64, samples: usize) -> bool {
        if self.value(0.0) != 0.0 || self.d1(0.0) != 0.0 {
            return false;
        }
        let ts = geometric_grid(hi * 1e-6, hi, samples.max(2));
        let mut prev = 0.0;
        for t in ts {
            let d = self.d1(t);
            if !(d > 0.0) || d < prev * (1.0 - 1e-12) {
                return false;
            }
            prev = d;
        }
        true
    }

    /// Sampled bracket of `t psi''(t) / psi'(t)`, the quantity that must stay
    /// bounded above and below for shifts to be well behaved.
    pub fn shift_ratio_bounds(&self, lo: f64, hi: f64, samples: usize) -> (f64, f64) {
        geometric_grid(lo, hi, samples.max(2))
            .into_iter()
            .map(|t| t * self.d2(t) / self.d1(t))
            .fold((f64::INFINITY, 0.0f64), |(mn, mx), r| (mn.min(r), mx.max(r)))
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for NFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NFunction::Power { p, scale } if *scale == 1.0 => write!(f, "power:{p}"),
            NFunction::Power { p, scale } => write!(f, "power:{p}:{scale}"),
            NFunction::Vp { p } => write!(f, "vp:{p}"),
            NFunction::PsiAux { p } => write!(f, "psi_aux:{p}"),
            NFunction::Shifted { base, a } => write!(f, "shifted:{base}:{a}"),
        }
    }
}

impl std::str::FromStr for NFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NFunction::parse(s)
    }
}

fn shifted_value(base: &NFunction, a: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return base.value(t);
    }
    if let NFunction::Power { p, scale } = base {
        let (p, c) = (*p, *scale);
        let u = t / a;
        if u < 0.5 {
            // c p a^p sum_k binom(p-2, k) u^{k+2} / (k+2)
            let mut sum = 0.0;
            let mut uk = u * u;
            for k in 0..200 {
                let term = binomial(p - 2.0, k) * uk / (k as f64 + 2.0);
                sum += term;
                if term.abs() <= 1e-17 * sum.abs() {
                    break;
                }
                uk *= u;
            }
            return c * p * a.powf(p) * sum;
        }
        let s = a + t;
        return c * p * (s.powf(p) / p - a * s.powf(p - 1.0) / (p - 1.0) - a.powf(p) / p + a.powf(p) / (p - 1.0));
    }
    let f = |s: f64| base.d1(a + s) * s / (a + s);
    quadrature::adaptive(&f, 0.0, t, SHIFT_QUAD_TOL)
}

/// `count` points geometrically spaced in `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (la, lb) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (la + (lb - la) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Maximizes a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Convex conjugate `sup_t (s t - f(t))` over `t >= 0` of a convex function,
/// bracketing the maximizer by doubling until it is interior.
pub fn conjugate(f: &dyn Fn(f64) -> f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let g = |t: f64| s * t - f(t);
    let mut hi = 1.0;
    loop {
        let (x, v) = golden_section_max(g, 0.0, hi, 1e-13);
        if x < 0.9 * hi || hi > 1e200 {
            return v.max(0.0);
        }
        hi *= 2.0;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Delta2Estimate {
    pub delta2: f64,
    pub nabla2: f64,
}

/// Sampled `Delta_2(psi) = sup psi(2t)/psi(t)` on a geometric grid over
/// `t_range`, and `nabla_2(psi)` as the Delta_2 constant of the numerically
/// computed conjugate on the dual range `psi'(t_range)`.
pub fn delta2_nabla2(psi: &NFunction, t_range: (f64, f64), samples: usize) -> Result<Delta2Estimate> {
    let (lo, hi) = t_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidArgument(format!("invalid range ({lo}, {hi})")));
    }
    let ts = geometric_grid(lo, hi, samples.max(2));
    let delta2 = ts
        .iter()
        .map(|&t| psi.value(2.0 * t) / psi.value(t))
        .fold(0.0f64, f64::max);
    let f = |t: f64| psi.value(t);
    let nabla2 = ts
        .iter()
        .map(|&t| {
            let s = psi.d1(t);
            conjugate(&f, 2.0 * s) / conjugate(&f, s)
        })
        .filter(|r| r.is_finite())
        .fold(0.0f64, f64::max);
    Ok(Delta2Estimate { delta2, nabla2 })
}

/// `V_p(z) = (1 + |z|^2)^{p/2} - 1`.
pub fn v_p<T: Real>(p: f64, z: &[T]) -> T {
    let r2 = z.iter().fold(0.0, |a, x| a + x.as_f64() * x.as_f64());
    T::lit((0.5 * p * r2.ln_1p()).exp_m1())
}

/// `V_p'(z) = p (1 + |z|^2)^{(p-2)/2} z`.
pub fn v_p_gradient<T: Real>(p: f64, z: &[T]) -> Vec<T> {
    let r2 = z.iter().fold(0.0, |a, x| a + x.as_f64() * x.as_f64());
    let c = T::lit(p * (1.0 + r2).powf((p - 2.0) / 2.0));
    z.iter().map(|&x| c * x).collect()
}

/// `V_p''(z) = p (1+|z|^2)^{(p-2)/2} (I + (p-2) z z^T / (1+|z|^2))`.
pub fn v_p_hessian<T: Real>(p: f64, z: &[T]) -> DMatrix<T> {
    let r2 = z.iter().fold(0.0, |a, x| a + x.as_f64() * x.as_f64());
    let c = p * (1.0 + r2).powf((p - 2.0) / 2.0);
    let k = (p - 2.0) / (1.0 + r2);
    DMatrix::from_fn(z.len(), z.len(), |i, j| {
        let zz = z[i].as_f64() * z[j].as_f64();
        T::lit(c * (if i == j { 1.0 } else { 0.0 } + k * zz))
    })
}

/// `<V_p''(y) w, w>` in f64.
fn vp_second_form(p: f64, y: &[f64], w: &[f64]) -> f64 {
    let y2: f64 = y.iter().map(|x| x * x).sum();
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let yw: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
    p * (1.0 + y2).powf((p - 2.0) / 2.0) * (w2 + (p - 2.0) * yw * yw / (1.0 + y2))
}

/// `V_p(z+w) - V_p(z) - <V_p'(z), w>`, switching to the integral form
/// `int_0^1 (1-s) <V_p''(z+sw) w, w> ds` when `w` is small against `z`.
pub fn vp_taylor_remainder(p: f64, z: &[f64], w: &[f64]) -> f64 {
    let z2: f64 = z.iter().map(|x| x * x).sum();
    let w2: f64 = w.iter().map(|x| x * x).sum();
    if w2 >= 1e-2 * (1.0 + z2) {
        let zw: Vec<f64> = z.iter().zip(w).map(|(a, b)| a + b).collect();
        let g = v_p_gradient(p, z);
        let gw: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
        return v_p(p, &zw) - v_p(p, z) - gw;
    }
    let f = |s: f64| {
        let y: Vec<f64> = z.iter().zip(w).map(|(a, b)| a + s * b).collect();
        (1.0 - s) * vp_second_form(p, &y, w)
    };
    quadrature::adaptive(&f, 0.0, 1.0, 1e-12)
}

/// `R(z, w) = remainder / ((1 + |z|^2 + |w|^2)^{(p-2)/2} |w|^2)`.
pub fn vp_comparison_quotient(p: f64, z: &[f64], w: &[f64]) -> f64 {
    let z2: f64 = z.iter().map(|x| x * x).sum();
    let w2: f64 = w.iter().map(|x| x * x).sum();
    vp_taylor_remainder(p, z, w) / ((1.0 + z2 + w2).powf((p - 2.0) / 2.0) * w2)
}

#[derive(Clone, Debug, Serialize)]
pub struct Bracket {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl Bracket {
    pub fn is_finite_positive(&self) -> bool {
        self.min > 0.0 && self.max.is_finite() && self.min <= self.max
    }
}

fn log_uniform_vector(rng: &mut rng::Rng, dim: usize) -> Vec<f64> {
    let mag = 10f64.powf(rng.random_range(-3.0..3.0));
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for x in &mut v {
        *x *= mag / n;
    }
    v
}

/// Sampled bracket of [`vp_comparison_quotient`] over random pairs in
/// `R^dim` with magnitudes log-uniform in `[1e-3, 1e3]`.
pub fn vp_comparison_theta(p: f64, dim: usize, sample_count: usize, seed: u64) -> Result<Bracket> {
    check_exponent(p)?;
    let mut rng = rng::stream(seed, 0x7e7a);
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for _ in 0..sample_count {
        let z = log_uniform_vector(&mut rng, dim);
        let w = log_uniform_vector(&mut rng, dim);
        let r = vp_comparison_quotient(p, &z, &w);
        min = min.min(r);
        max = max.max(r);
    }
    Ok(Bracket { min, max, samples: sample_count })
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftComparison {
    pub a: f64,
    pub min: f64,
    pub max: f64,
    /// `max(max, 1/min)`.
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub label: String,
    pub per_shift: Vec<ShiftComparison>,
    /// Worst constant over the grid.
    pub constant: f64,
    /// Largest over smallest per-shift constant.
    pub uniformity: f64,
}

fn comparison(label: String, a_values: &[f64], t_values: &[f64], ratio: impl Fn(f64, f64) -> f64) -> ComparisonReport {
    let per_shift: Vec<ShiftComparison> = a_values
        .iter()
        .map(|&a| {
            let (min, max) = t_values
                .iter()
                .map(|&t| ratio(a, t))
                .fold((f64::INFINITY, 0.0f64), |(mn, mx), r| (mn.min(r), mx.max(r)));
            ShiftComparison { a, min, max, constant: max.max(1.0 / min) }
        })
        .collect();
    let constant = per_shift.iter().map(|s| s.constant).fold(0.0, f64::max);
    let smallest = per_shift.iter().map(|s| s.constant).fold(f64::INFINITY, f64::min);
    ComparisonReport {
        label,
        per_shift,
        constant,
        uniformity: constant / smallest,
    }
}

/// Sampled constant in `psi_a(t) <~ psi''(a+t) t^2 <~ psi_a(t)`: per shift
/// the ratio `psi_a(t) / (psi''(a+t) t^2)` is bracketed over `t_values`.
pub fn check_f1(psi: &NFunction, a_values: &[f64], t_values: &[f64]) -> Result<ComparisonReport> {
    let shifts = a_values.iter().map(|&a| psi.shift(a)).collect::<Result<Vec<_>>>()?;
    Ok(comparison(format!("{psi}"), a_values, t_values, |a, t| {
        let idx = a_values.iter().position(|&x| x == a).expect("a from list");
        shifts[idx].value(t) / (psi.d2(a + t) * t * t)
    }))
}

/// Sampled bracket of `Psi_a(t) / ((1 + a^2 + t^2)^{(p-2)/2} t^2)` for the
/// auxiliary `Psi(t) = (1+t)^{p-2} t^2`.
pub fn check_compare_subquadratic(p: f64, a_values: &[f64], t_values: &[f64]) -> Result<ComparisonReport> {
    let psi = NFunction::psi_aux(p)?;
    let shifts = a_values.iter().map(|&a| psi.shift(a)).collect::<Result<Vec<_>>>()?;
    Ok(comparison(format!("{psi}"), a_values, t_values, |a, t| {
        let idx = a_values.iter().position(|&x| x == a).expect("a from list");
        shifts[idx].value(t) / ((1.0 + a * a + t * t).powf((p - 2.0) / 2.0) * t * t)
    }))
}

/// Sampled bracket of `Psi''(a+t) / (1 + a^2 + t^2)^{(p-2)/2}` (the second
/// line of the auxiliary bounds).
pub fn check_psi_aux_second_derivative(p: f64, a_values: &[f64], t_values: &[f64]) -> Result<ComparisonReport> {
    let psi = NFunction::psi_aux(p)?;
    Ok(comparison(format!("{psi}''"), a_values, t_values, |a, t| {
        psi.d2(a + t) / (1.0 + a * a + t * t).powf((p - 2.0) / 2.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, t: f64) -> f64 {
        let h = 1e-5 * t.max(1e-3);
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn registry_roundtrip() {
        for s in ["power:1.5", "power:2:0.5", "vp:3", "psi_aux:1.2", "shifted:power:1.5:10", "shifted:vp:2.5:0.5"] {
            let f = NFunction::parse(s).unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!(NFunction::parse("power:0.5").is_err());
        assert!(NFunction::parse("cube").is_err());
        assert!(matches!(NFunction::parse("shifted:power:2:-1"), Err(Error::NegativeShift(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let fns = [
            NFunction::power(1.5).unwrap(),
            NFunction::vp(3.0).unwrap(),
            NFunction::psi_aux(1.2).unwrap(),
            NFunction::power(1.5).unwrap().shift(2.0).unwrap(),
            NFunction::vp(1.5).unwrap().shift(0.3).unwrap(),
        ];
        for f in &fns {
            for t in [0.1, 0.7, 3.0, 20.0] {
                let d1 = fd(|s| f.value(s), t);
                assert!((d1 - f.d1(t)).abs() <= 1e-6 * f.d1(t).abs().max(1.0), "{f} d1 at {t}");
                let d2 = fd(|s| f.d1(s), t);
                assert!((d2 - f.d2(t)).abs() <= 1e-6 * f.d2(t).abs().max(1.0), "{f} d2 at {t}");
            }
        }
    }

    #[test]
    fn shift_by_zero_is_identity() {
        for f in [NFunction::power(1.5).unwrap(), NFunction::vp(2.5).unwrap()] {
            let g = f.shift(0.0).unwrap();
            for t in [0.01, 1.0, 7.0] {
                assert!((g.value(t) - f.value(t)).abs() <= 1e-12 * f.value(t));
            }
        }
    }

    #[test]
    fn quadratic_is_shift_invariant() {
        let q = NFunction::power_normalized(2.0).unwrap();
        for a in [0.0, 0.5, 3.0, 100.0] {
            let s = q.shift(a).unwrap();
            for t in [0.001, 0.4, 9.0] {
                assert!((s.value(t) - t * t / 2.0).abs() < 1e-12 * t * t);
            }
        }
    }

    #[test]
    fn power_shift_closed_form_matches_quadrature() {
        let f = NFunction::power_normalized(1.5).unwrap();
        for (a, t) in [(1.0, 1.0), (10.0, 0.01), (1.0, 0.4), (1.0, 0.6), (0.01, 5.0)] {
            let closed = f.shift(a).unwrap().value(t);
            let g = |s: f64| f.d1(a + s) * s / (a + s);
            let oracle = quadrature::adaptive(&g, 0.0, t, 1e-13);
            assert!((closed - oracle).abs() <= 1e-10 * oracle, "a={a} t={t}: {closed} vs {oracle}");
        }
    }

    #[test]
    fn delta2_of_powers() {
        for p in [1.2, 1.5, 2.0, 3.0] {
            let est = delta2_nabla2(&NFunction::power(p).unwrap(), (1e-2, 1e2), 9).unwrap();
            assert!((est.delta2 - 2f64.powf(p)).abs() < 1e-9 * 2f64.powf(p));
            let expected = 2f64.powf(p / (p - 1.0));
            assert!((est.nabla2 - expected).abs() < 1e-5 * expected, "p={p}: {}", est.nabla2);
        }
    }

    #[test]
    fn conjugate_of_square() {
        let f = |t: f64| t * t;
        for s in [0.5, 2.0, 10.0] {
            assert!((conjugate(&f, s) - s * s / 4.0).abs() < 1e-9 * s * s);
        }
    }

    #[test]
    fn vp_basics() {
        assert_eq!(v_p::<f64>(1.7, &[0.0, 0.0]), 0.0);
        let z = [0.3, -1.2, 2.0];
        let r2: f64 = z.iter().map(|x| x * x).sum();
        assert!((v_p(2.0, &z) - r2).abs() < 1e-12);
    }

    #[test]
    fn vp_quadratic_quotient_is_one() {
        let b = vp_comparison_theta(2.0, 3, 500, 1).unwrap();
        assert!((b.min - 1.0).abs() < 1e-8 && (b.max - 1.0).abs() < 1e-8);
    }

    #[test]
    fn vp_quotient_small_w_limit() {
        // As w -> 0 the quotient tends to <V''(z)e,e> / (2 (1+|z|^2)^{(p-2)/2}).
        let p = 3.0;
        let z = [1.0, 2.0];
        let e = [0.6, 0.8];
        let w = [e[0] * 1e-6, e[1] * 1e-6];
        let limit = vp_second_form(p, &z, &e) / (2.0 * 6f64.powf((p - 2.0) / 2.0));
        assert!((vp_comparison_quotient(p, &z, &w) - limit).abs() < 1e-5 * limit);
    }
}
