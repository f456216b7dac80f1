use rand::Rng as _;
use serde::Serialize;

use super::integrand::{check_integrand_dim, Integrand};
use super::{range_samples, sphere_samples};
use crate::error::Result;
use crate::nfunctions::v_p;
use crate::operators::{sphere_points, DifferentialOperator};
use crate::rng;
use crate::scalar::{norm, Real};

/// The sample at which a check came closest to failing (or failed).
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Pure-tensor direction for the rank-one checks.
    pub direction: Option<Vec<f64>>,
    /// Second point for the modulus check.
    pub other_x: Option<Vec<f64>>,
    /// The normalized quantity compared against the bound.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    /// False when the hypothesis does not concern this integrand.
    pub applicable: bool,
    pub passed: bool,
    /// Worst sampled value of the checked quantity.
    pub worst: f64,
    /// The bound it is compared against.
    pub bound: f64,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub integrand: String,
    pub operator: String,
    pub samples: usize,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    worst: f64,
    witness: Option<Witness>,
    maximize: bool,
}

impl Tracker {
    fn new(maximize: bool) -> Self {
        Self { worst: if maximize { f64::NEG_INFINITY } else { f64::INFINITY }, witness: None, maximize }
    }

    fn offer(&mut self, value: f64, make: impl FnOnce() -> Witness) {
        let better = if self.maximize { value > self.worst } else { value < self.worst };
        if better || value.is_nan() {
            self.worst = value;
            let mut w = make();
            w.value = value;
            self.witness = Some(w);
        }
    }
}

fn witness(x: &[f64], z: &[f64]) -> Witness {
    Witness { x: x.to_vec(), z: z.to_vec(), direction: None, other_x: None, value: 0.0 }
}

/// Sampled checks of the structural hypotheses on `F` relative to `op`:
///
/// * `growth`: `|F(x,y,z)| <= c (1 + |z|^p)` with the declared `c`;
/// * `derivatives`: `D_z F` agrees with central differences to `1e-6`
///   (relative at unit scale) and `D_zz F` is symmetric;
/// * `rank_one_convexity`: `F - l V_p` is convex along pure tensors
///   `A[xi] v` (`l` the declared coercivity, else 0);
/// * `rank_one_lipschitz`: `|F(w) - F(z)| <= C (1 + |w|^{p-1} + |z|^{p-1}) |w - z|`
///   for `w - z` a pure tensor, with `C <= 3 p max(c, 1)`;
/// * `x_modulus`: for non-autonomous `F`,
///   `|F(x,y,z) - F(x',y',z)| <= omega(|x-x'|^p + |y-y'|^p)(1 + |z|^p)`
///   over pairs in the unit cube.
pub fn check_hypotheses<T: Real>(
    f: &dyn Integrand,
    op: &DifferentialOperator<T>,
    sample_budget: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    check_integrand_dim(f, op.dim_w())?;
    let op = op.cast::<f64>();
    let (n, big_n, l) = (op.n(), op.dim_v(), op.dim_w());
    let p = f.exponent();
    let budget = sample_budget.max(4);
    let mut rng = rng::stream(seed, 0x4b1);
    let point = |rng: &mut rng::Rng| -> Vec<f64> { (0..n).map(|_| rng.random_range(0.0..1.0)).collect() };
    let ys = sphere_samples(big_n, &[0.5], budget, rng::child(seed, 1));

    // growth
    let zs = range_samples(&op, &[0.0, 1e-3, 0.1, 1.0, 10.0, 1e3], budget.div_ceil(5), rng::child(seed, 2));
    let c = f.growth_constant();
    let mut growth = Tracker::new(true);
    for (k, z) in zs.iter().enumerate() {
        let x = point(&mut rng);
        let ratio = f.value(&x, &ys[k % ys.len()], z).abs() / (c * (1.0 + norm(z).powf(p)));
        growth.offer(ratio, || witness(&x, z));
    }
    let growth_check = HypothesisCheck {
        name: "growth".into(),
        applicable: true,
        passed: growth.worst <= 1.0 + 1e-10,
        worst: growth.worst,
        bound: 1.0,
        witness: growth.witness,
    };

    // derivative consistency
    let zs = range_samples(&op, &[0.1, 1.0, 3.0, 10.0], budget.div_ceil(4), rng::child(seed, 3));
    let mut deriv = Tracker::new(true);
    let mut g = vec![0.0; l];
    for (k, z) in zs.iter().enumerate() {
        let x = point(&mut rng);
        let y = &ys[k % ys.len()];
        f.gradient(&x, y, z, &mut g);
        let d = &sphere_samples(l, &[1.0], 1, rng::child(seed, 100 + k as u64))[0];
        let h = 1e-5 * (1.0 + norm(z));
        let zp: Vec<f64> = z.iter().zip(d).map(|(a, b)| a + h * b).collect();
        let zm: Vec<f64> = z.iter().zip(d).map(|(a, b)| a - h * b).collect();
        let fd = (f.value(&x, y, &zp) - f.value(&x, y, &zm)) / (2.0 * h);
        let gd: f64 = g.iter().zip(d).map(|(a, b)| a * b).sum();
        let rel = (fd - gd).abs() / (1.0 + norm(&g));
        let hess = f.hessian(&x, y, z);
        let asym = (&hess - hess.transpose()).norm() / (1.0 + hess.norm());
        deriv.offer(rel.max(asym * 1e6), || witness(&x, z));
    }
    let deriv_check = HypothesisCheck {
        name: "derivatives".into(),
        applicable: true,
        passed: deriv.worst <= 1e-6,
        worst: deriv.worst,
        bound: 1e-6,
        witness: deriv.witness,
    };

    // rank-one checks along pure tensors
    let xis: Vec<Vec<f64>> = sphere_points::<f64>(n, budget.max(2 * n));
    let vs = sphere_samples(big_n, &[1.0], budget, rng::child(seed, 4));
    let zs = range_samples(&op, &[0.0, 0.5, 1.0, 2.0], budget.div_ceil(4), rng::child(seed, 5));
    let ell = f.coercivity().unwrap_or(0.0);
    let lip_bound = 3.0 * p * c.max(1.0);
    let mut convex = Tracker::new(false);
    let mut lip = Tracker::new(true);
    let mut tried = 0;
    for k in 0..budget {
        let xi = &xis[k % xis.len()];
        let v = &vs[k % vs.len()];
        let tensor = op.pure_tensor(v, xi)?;
        let tn = tensor.norm();
        if tn <= 1e-10 * op.operator_norm().max(1e-300) {
            continue;
        }
        tried += 1;
        let dir: Vec<f64> = tensor.iter().map(|t| t / tn).collect();
        let z = &zs[k % zs.len()];
        let x = point(&mut rng);
        let y = &ys[k % ys.len()];
        let along = |t: f64| -> Vec<f64> { z.iter().zip(&dir).map(|(a, b)| a + t * b).collect() };
        let phi = |t: f64| {
            let w = along(t);
            f.value(&x, y, &w) - ell * v_p(p, &w)
        };
        for s in [0.25, 1.0] {
            let (a, b, m) = (phi(s), phi(-s), phi(0.0));
            let scale = 1.0 + a.abs() + b.abs() + m.abs();
            let second = (a + b - 2.0 * m) / (s * s);
            let value = if second >= -1e-10 * scale / (s * s) { 0.0 } else { second };
            convex.offer(value, || Witness {
                direction: Some(dir.clone()),
                ..witness(&x, z)
            });
        }
        for t in [0.1, 0.5, 1.0, 2.0] {
            let w = along(t);
            let num = (f.value(&x, y, &w) - f.value(&x, y, z)).abs();
            let den = (1.0 + norm(&w).powf(p - 1.0) + norm(z).powf(p - 1.0)) * t;
            lip.offer(num / den, || Witness { direction: Some(dir.clone()), ..witness(&x, z) });
        }
    }
    let convex_worst = if tried == 0 { 0.0 } else { convex.worst };
    let convex_check = HypothesisCheck {
        name: "rank_one_convexity".into(),
        applicable: tried > 0,
        passed: convex_worst >= 0.0,
        worst: convex_worst,
        bound: 0.0,
        witness: convex.witness,
    };
    let lip_worst = if tried == 0 { 0.0 } else { lip.worst };
    let lip_check = HypothesisCheck {
        name: "rank_one_lipschitz".into(),
        applicable: tried > 0,
        passed: lip_worst <= lip_bound,
        worst: lip_worst,
        bound: lip_bound,
        witness: lip.witness,
    };

    // continuity modulus in (x, y)
    let modulus_check = if f.is_autonomous() && !f.depends_on_y() {
        HypothesisCheck {
            name: "x_modulus".into(),
            applicable: false,
            passed: true,
            worst: 0.0,
            bound: 1.0,
            witness: None,
        }
    } else {
        let zs = range_samples(&op, &[0.0, 1.0, 10.0], budget.div_ceil(3), rng::child(seed, 6));
        match f.modulus() {
            None => HypothesisCheck {
                name: "x_modulus".into(),
                applicable: true,
                passed: false,
                worst: f64::INFINITY,
                bound: 1.0,
                witness: None,
            },
            Some(omega) => {
                let mut track = Tracker::new(true);
                for (k, z) in zs.iter().enumerate() {
                    let x = point(&mut rng);
                    // pairs at all scales, including very close ones
                    let scale = 10f64.powf(-rng.random_range(0.0..6.0));
                    let x2: Vec<f64> = x
                        .iter()
                        .map(|&a| (a + scale * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0))
                        .collect();
                    let y = &ys[k % ys.len()];
                    let y2 = &ys[(k + 1) % ys.len()];
                    let dx: Vec<f64> = x.iter().zip(&x2).map(|(a, b)| a - b).collect();
                    let dy: Vec<f64> = y.iter().zip(y2).map(|(a, b)| a - b).collect();
                    let arg = norm(&dx).powf(p) + if f.depends_on_y() { norm(&dy).powf(p) } else { 0.0 };
                    let y2 = if f.depends_on_y() { y2 } else { y };
                    let num = (f.value(&x, y, z) - f.value(&x2, y2, z)).abs();
                    let den = omega.eval(arg) * (1.0 + norm(z).powf(p));
                    let ratio = if num == 0.0 { 0.0 } else { num / den };
                    track.offer(ratio, || Witness { other_x: Some(x2.clone()), ..witness(&x, z) });
                }
                HypothesisCheck {
                    name: "x_modulus".into(),
                    applicable: true,
                    passed: track.worst <= 1.0 + 1e-10,
                    worst: track.worst,
                    bound: 1.0,
                    witness: track.witness,
                }
            }
        }
    };

    Ok(HypothesisReport {
        integrand: f.label(),
        operator: op.label(),
        samples: budget,
        checks: vec![growth_check, deriv_check, convex_check, lip_check, modulus_check],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::*;
    use crate::variational::*;

    #[test]
    fn vp_passes_everything() {
        let op = symmetric_gradient::<f64>(2);
        let r = check_hypotheses(&VpIntegrand::new(2.0).unwrap(), &op, 200, 0).unwrap();
        assert!(r.passed(), "{r:?}");
        let lip = r.get("rank_one_lipschitz").unwrap();
        assert!(lip.worst <= 6.0);
        assert!(!r.get("x_modulus").unwrap().applicable);
    }

    #[test]
    fn concave_integrand_fails_rank_one_convexity_with_witness() {
        let op = symmetric_gradient::<f64>(2);
        let r = check_hypotheses(&ConcaveQuadratic, &op, 100, 0).unwrap();
        let c = r.get("rank_one_convexity").unwrap();
        assert!(!c.passed);
        let w = c.witness.as_ref().unwrap();
        assert!(w.direction.is_some());
        assert!((w.value + 2.0).abs() < 1e-6);
        assert!(r.get("growth").unwrap().passed);
    }

    #[test]
    fn holder_integrand_passes_modulus_check() {
        let op = symmetric_gradient::<f64>(2);
        let f = NonAutonomousVp::new(2.0, 0.3).unwrap();
        let r = check_hypotheses(&f, &op, 300, 1).unwrap();
        assert!(r.passed(), "{r:?}");
        let m = r.get("x_modulus").unwrap();
        assert!(m.applicable && m.worst > 0.0);
    }

    #[test]
    fn determinant_toy_is_rank_one_convex() {
        let op = gradient::<f64>(2, 2);
        let r = check_hypotheses(&DetPlusVp::new(0.5, 2.0).unwrap(), &op, 200, 2).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn determinant_is_rejected_on_wrong_target() {
        let op = symmetric_gradient::<f64>(3);
        assert!(check_hypotheses(&DetPlusVp::new(0.5, 2.0).unwrap(), &op, 10, 0).is_err());
    }
}
