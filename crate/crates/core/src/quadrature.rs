//! Gauss-Legendre rules and an adaptive bisection driver built on them.

use std::sync::OnceLock;

use crate::scalar::Real;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn rule15() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(15))
}

/// Fixed 15-point rule on [a, b].
pub fn fixed<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> T {
    let (x, w) = rule15();
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    x.iter().zip(w).fold(T::zero(), |acc, (&xi, &wi)| {
        acc + T::lit(wi) * f(mid + half * T::lit(xi))
    }) * half
}

/// Adaptive integration of `f` over [a, b] to relative accuracy `rel_tol`.
pub fn adaptive<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, rel_tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let whole = fixed(f, a, b);
    // error budget per unit length, so flat tails stop refining early
    let density = (rel_tol * whole.abs() / (b - a).abs()).max(T::lit(1e-300));
    recurse(f, a, b, whole, rel_tol, density, 0)
}

fn recurse<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    whole: T,
    rel_tol: T,
    density: T,
    depth: usize,
) -> T {
    let mid = (a + b) * T::lit(0.5);
    let left = fixed(f, a, mid);
    let right = fixed(f, mid, b);
    let refined = left + right;
    let err = (refined - whole).abs();
    if depth >= 40 || err <= rel_tol * refined.abs() || err <= density * (b - a).abs() {
        return refined;
    }
    recurse(f, a, mid, left, rel_tol, density, depth + 1)
        + recurse(f, mid, b, right, rel_tol, density, depth + 1)
}
