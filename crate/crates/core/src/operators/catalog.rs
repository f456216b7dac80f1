//! Builtin operators. Matrix-valued fields are flattened row-major, so the
//! entry `(a, b)` of an `n x n` matrix lives at index `a * n + b`; k-forms use
//! the lexicographic basis `e_I`, `I = i_1 < ... < i_k`.

use nalgebra::DMatrix;

use super::DifferentialOperator;
use crate::error::{Error, Result};
use crate::linalg::MultiIndex;
use crate::scalar::Real;

pub const BUILTIN_NAMES: &[&str] = &[
    "gradient",
    "symmetric_gradient",
    "tracefree_symmetric_gradient",
    "exterior_derivative_pair",
    "div_curl",
    "split_laplace_beltrami",
    "curl",
    "divergence",
    "saint_venant",
    "partial",
];

fn cast<T: Real>(m: DMatrix<f64>) -> DMatrix<T> {
    m.map(T::lit)
}

fn first_order<T: Real>(name: String, mats: Vec<DMatrix<f64>>) -> DifferentialOperator<T> {
    DifferentialOperator::first_order(&name, mats.into_iter().map(cast).collect())
        .expect("builtin operators are well formed")
        .with_name(name)
}

/// Full gradient of `R^big_n`-valued maps; `(Du)_{k, j} = d_j u_k`.
pub fn gradient<T: Real>(n: usize, big_n: usize) -> DifferentialOperator<T> {
    let mats = (0..n)
        .map(|j| {
            let mut m = DMatrix::zeros(big_n * n, big_n);
            for k in 0..big_n {
                m[(k * n + j, k)] = 1.0;
            }
            m
        })
        .collect();
    first_order(format!("gradient:{n}:{big_n}"), mats)
}

/// `d_j` acting on scalar functions (`j` zero-based).
pub fn partial<T: Real>(n: usize, j: usize) -> DifferentialOperator<T> {
    let mats = (0..n)
        .map(|i| DMatrix::from_element(1, 1, if i == j { 1.0 } else { 0.0 }))
        .collect();
    first_order(format!("partial:{n}:{}", j + 1), mats)
}

fn symgrad_mats(n: usize, tracefree: bool) -> Vec<DMatrix<f64>> {
    (0..n)
        .map(|j| {
            let mut m = DMatrix::zeros(n * n, n);
            for a in 0..n {
                for b in 0..n {
                    if j == b {
                        m[(a * n + b, a)] += 0.5;
                    }
                    if j == a {
                        m[(a * n + b, b)] += 0.5;
                    }
                }
                if tracefree {
                    m[(a * n + a, j)] -= 1.0 / n as f64;
                }
            }
            m
        })
        .collect()
}

/// `eps u = (Du + Du^T) / 2`.
pub fn symmetric_gradient<T: Real>(n: usize) -> DifferentialOperator<T> {
    first_order(format!("symmetric_gradient:{n}"), symgrad_mats(n, false))
}

/// `eps^D u = eps u - (div u / n) Id`. For `n = 1` this is the zero operator.
pub fn tracefree_symmetric_gradient<T: Real>(n: usize) -> DifferentialOperator<T> {
    first_order(format!("tracefree_symmetric_gradient:{n}"), symgrad_mats(n, true))
}

/// `u -> (div u, curl u)` on `R^3`.
pub fn div_curl<T: Real>() -> DifferentialOperator<T> {
    let c = curl_mats(3);
    let mats = (0..3)
        .map(|j| {
            let mut m = DMatrix::zeros(4, 3);
            m[(0, j)] = 1.0;
            m.view_mut((1, 0), (3, 3)).copy_from(&c[j]);
            m
        })
        .collect();
    first_order("div_curl".to_string(), mats)
}

fn curl_mats(n: usize) -> Vec<DMatrix<f64>> {
    match n {
        2 => vec![
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]),
        ],
        _ => (0..3)
            .map(|j| {
                // (curl u)_i = eps_{ijk} d_j u_k
                let mut m = DMatrix::zeros(3, 3);
                for i in 0..3 {
                    for k in 0..3 {
                        m[(i, k)] = levi_civita(i, j, k);
                    }
                }
                m
            })
            .collect(),
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Curl on `R^3`, or the scalar curl `d_1 u_2 - d_2 u_1` on `R^2`.
pub fn curl<T: Real>(n: usize) -> DifferentialOperator<T> {
    first_order(format!("curl:{n}"), curl_mats(n))
}

pub fn divergence<T: Real>(n: usize) -> DifferentialOperator<T> {
    let mats = (0..n)
        .map(|j| {
            let mut m = DMatrix::zeros(1, n);
            m[(0, j)] = 1.0;
            m
        })
        .collect();
    first_order(format!("divergence:{n}"), mats)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Sign of the permutation sorting `seq` (entries distinct).
fn perm_sign(seq: &[usize]) -> f64 {
    let mut inv = 0;
    for a in 0..seq.len() {
        for b in a + 1..seq.len() {
            if seq[a] > seq[b] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Matrix of `v -> e_j ^ v` from k-forms to (k+1)-forms.
fn wedge_matrix(n: usize, k: usize, j: usize) -> DMatrix<f64> {
    let from = subsets(n, k);
    let to = subsets(n, k + 1);
    let mut m = DMatrix::zeros(to.len(), from.len());
    for (c, set) in from.iter().enumerate() {
        if set.contains(&j) {
            continue;
        }
        let mut seq = vec![j];
        seq.extend_from_slice(set);
        let sign = perm_sign(&seq);
        seq.sort_unstable();
        let r = to.iter().position(|s| *s == seq).expect("subset exists");
        m[(r, c)] = sign;
    }
    m
}

/// Hodge star from k-forms to (n-k)-forms: `e_I -> sign(I, I^c) e_{I^c}`.
fn hodge_matrix(n: usize, k: usize) -> DMatrix<f64> {
    let from = subsets(n, k);
    let to = subsets(n, n - k);
    let mut m = DMatrix::zeros(to.len(), from.len());
    for (c, set) in from.iter().enumerate() {
        let comp: Vec<usize> = (0..n).filter(|i| !set.contains(i)).collect();
        let mut seq = set.clone();
        seq.extend_from_slice(&comp);
        let r = to.iter().position(|s| *s == comp).expect("subset exists");
        m[(r, c)] = perm_sign(&seq);
    }
    m
}

/// Coefficient of `d_j` in `d*` on k-forms: `v -> *(e_j ^ *v)`.
fn codifferential_matrix(n: usize, k: usize, j: usize) -> DMatrix<f64> {
    hodge_matrix(n, n - k + 1) * wedge_matrix(n, n - k, j) * hodge_matrix(n, k)
}

fn check_form_degree(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "form degree must satisfy 1 <= k <= n - 1, got k = {k}, n = {n}"
        )));
    }
    Ok(())
}

/// `(d, d*)` on k-forms, valued in `Lambda^{k+1} x Lambda^{k-1}`.
pub fn exterior_derivative_pair<T: Real>(n: usize, k: usize) -> Result<DifferentialOperator<T>> {
    check_form_degree(n, k)?;
    let mats = (0..n)
        .map(|j| {
            let d = wedge_matrix(n, k, j);
            let ds = codifferential_matrix(n, k, j);
            let mut m = DMatrix::zeros(d.nrows() + ds.nrows(), d.ncols());
            m.view_mut((0, 0), d.shape()).copy_from(&d);
            m.view_mut((d.nrows(), 0), ds.shape()).copy_from(&ds);
            m
        })
        .collect();
    Ok(first_order(format!("exterior_derivative_pair:{n}:{k}"), mats))
}

/// `(d d*, d* d)` on k-forms, second order, valued in `Lambda^k x Lambda^k`.
pub fn split_laplace_beltrami<T: Real>(n: usize, k: usize) -> Result<DifferentialOperator<T>> {
    check_form_degree(n, k)?;
    let dim = subsets(n, k).len();
    let mut coeffs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let dds = wedge_matrix(n, k - 1, i) * codifferential_matrix(n, k, j);
            let dsd = codifferential_matrix(n, k + 1, i) * wedge_matrix(n, k, j);
            let mut m = DMatrix::zeros(2 * dim, dim);
            m.view_mut((0, 0), (dim, dim)).copy_from(&dds);
            m.view_mut((dim, 0), (dim, dim)).copy_from(&dsd);
            let alpha = MultiIndex::unit(n, i).add(&MultiIndex::unit(n, j));
            coeffs.push((alpha, cast::<T>(m)));
        }
    }
    let name = format!("split_laplace_beltrami:{n}:{k}");
    DifferentialOperator::new(Some(name), n, dim, 2 * dim, 2, coeffs)
}

/// Compatibility operator annihilating symmetric gradients:
/// `d_22 e_11 + d_11 e_22 - d_12 (e_12 + e_21)` for `n = 2`, and the
/// incompatibility `inc(e)_ij = eps_ikl eps_jmn d_k d_m e_ln` for `n = 3`.
pub fn saint_venant<T: Real>(n: usize) -> Result<DifferentialOperator<T>> {
    let name = format!("saint_venant:{n}");
    match n {
        2 => {
            let coeffs = vec![
                (MultiIndex(vec![0, 2]), DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0])),
                (MultiIndex(vec![2, 0]), DMatrix::from_row_slice(1, 4, &[0.0, 0.0, 0.0, 1.0])),
                (MultiIndex(vec![1, 1]), DMatrix::from_row_slice(1, 4, &[0.0, -1.0, -1.0, 0.0])),
            ];
            DifferentialOperator::new(Some(name), 2, 4, 1, 2, coeffs.into_iter().map(|(a, m)| (a, cast(m))))
        }
        3 => {
            let mut coeffs = Vec::new();
            for k in 0..3 {
                for mm in 0..3 {
                    let mut mat = DMatrix::zeros(9, 9);
                    for i in 0..3 {
                        for j in 0..3 {
                            for l in 0..3 {
                                for nn in 0..3 {
                                    let s = levi_civita(i, k, l) * levi_civita(j, mm, nn);
                                    if s != 0.0 {
                                        mat[(i * 3 + j, l * 3 + nn)] += s;
                                    }
                                }
                            }
                        }
                    }
                    let alpha = MultiIndex::unit(3, k).add(&MultiIndex::unit(3, mm));
                    coeffs.push((alpha, cast::<T>(mat)));
                }
            }
            DifferentialOperator::new(Some(name), 3, 9, 9, 2, coeffs)
        }
        _ => Err(Error::InvalidArgument(format!("saint_venant is defined for n = 2, 3, got {n}"))),
    }
}

fn parse_params(spec: &str) -> Result<(String, Vec<usize>)> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default().trim().to_string();
    let params = parts
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::UnknownBuiltin(spec.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name, params))
}

/// Looks up a builtin by `NAME`, `NAME:n` or `NAME:n:k`.
pub fn builtin<T: Real>(spec: &str) -> Result<DifferentialOperator<T>> {
    let (name, p) = parse_params(spec)?;
    let get = |i: usize, default: usize| p.get(i).copied().unwrap_or(default);
    let positive = |v: usize| -> Result<usize> {
        if v == 0 {
            Err(Error::InvalidArgument(format!("{spec}: parameters must be positive")))
        } else {
            Ok(v)
        }
    };
    let op = match name.as_str() {
        "gradient" => gradient(positive(get(0, 2))?, positive(get(1, 1))?),
        "symmetric_gradient" => symmetric_gradient(positive(get(0, 2))?),
        "tracefree_symmetric_gradient" => tracefree_symmetric_gradient(positive(get(0, 2))?),
        "exterior_derivative_pair" => exterior_derivative_pair(get(0, 3), get(1, 1))?,
        "div_curl" => {
            if get(0, 3) != 3 {
                return Err(Error::InvalidArgument("div_curl is defined for n = 3".into()));
            }
            div_curl()
        }
        "split_laplace_beltrami" => split_laplace_beltrami(get(0, 2), get(1, 1))?,
        "curl" | "divergence-potential-curl" => match get(0, 3) {
            n @ (2 | 3) => curl(n),
            n => return Err(Error::InvalidArgument(format!("curl is defined for n = 2, 3, got {n}"))),
        },
        "divergence" => divergence(positive(get(0, 3))?),
        "saint_venant" => saint_venant(get(0, 2))?,
        "partial" | "partial_1" => {
            let n = positive(get(0, 2))?;
            let j = positive(get(1, 1))?;
            if j > n {
                return Err(Error::InvalidArgument(format!("partial: direction {j} exceeds n = {n}")));
            }
            partial(n, j - 1)
        }
        _ => return Err(Error::UnknownBuiltin(spec.to_string())),
    };
    Ok(op)
}

/// One default instance of every builtin, plus the common dimension variants.
pub fn builtin_catalog<T: Real>() -> Vec<DifferentialOperator<T>> {
    [
        "gradient:2:1",
        "gradient:3:2",
        "symmetric_gradient:2",
        "symmetric_gradient:3",
        "tracefree_symmetric_gradient:1",
        "tracefree_symmetric_gradient:2",
        "tracefree_symmetric_gradient:3",
        "exterior_derivative_pair:3:1",
        "exterior_derivative_pair:4:2",
        "div_curl",
        "split_laplace_beltrami:2:1",
        "split_laplace_beltrami:3:1",
        "curl:2",
        "curl:3",
        "divergence:2",
        "divergence:3",
        "saint_venant:2",
        "saint_venant:3",
        "partial:2:1",
    ]
    .iter()
    .map(|s| builtin(s).expect("catalog entries parse"))
    .collect()
}
