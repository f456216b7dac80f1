use std::fmt::Write as _;

use anyhow::{anyhow, bail, Result};
use serde_json::Value;

const ELLIPTICITY: &str = "[ellipticity: A[xi] injective for every xi != 0]";
const CONSTANT_RANK: &str = "[constant rank: rank A[xi] independent of xi != 0]";
const REDUCTION: &str = "[gradient form: A u = P D^m u, P injective on the essential range]";
const EXACTNESS: &str = "[exactness: ker B[xi] = im A[xi] for every xi != 0]";
const KORN: &str = "[modular Korn inequality: int psi(|D^m u|) <= C int psi(|A u|), mean-zero periodic u, A elliptic]";
const COUNTEREXAMPLE: &str = "[Korn failure without ellipticity: plane waves h(<x, xi'>) v with A[xi'] v = 0]";
const HYPOTHESES: &str = "[structural hypotheses: growth, differentiability, rank-one convexity, Lipschitz bound, x-modulus]";
const QUASICONVEXITY: &str =
    "[strong A-quasiconvexity: int F(z + A phi) - F(z) >= nu int (1 + |z|^2 + |A phi|^2)^((p-2)/2) |A phi|^2]";
const DIRECT_METHOD: &str = "[direct method: minimizer of the discretized energy]";
const REGULARITY: &str = "[partial regularity: decay of the local excess of D^m u]";

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| anyhow!("malformed report: missing `{key}`"))
}

fn num(v: &Value, key: &str) -> Result<f64> {
    let x = field(v, key)?;
    // non-finite values serialize as null
    if x.is_null() {
        return Ok(f64::NAN);
    }
    x.as_f64().ok_or_else(|| anyhow!("malformed report: `{key}` is not a number"))
}

fn flag(v: &Value, key: &str) -> Result<bool> {
    field(v, key)?.as_bool().ok_or_else(|| anyhow!("malformed report: `{key}` is not a boolean"))
}

fn text<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    field(v, key)?.as_str().ok_or_else(|| anyhow!("malformed report: `{key}` is not a string"))
}

fn vector(v: &Value) -> String {
    match v.as_array() {
        Some(a) => {
            let parts: Vec<String> = a
                .iter()
                .map(|x| x.as_f64().map(|f| format!("{f:.6}")).unwrap_or_else(|| x.to_string()))
                .collect();
            format!("[{}]", parts.join(", "))
        }
        None => v.to_string(),
    }
}

/// Text summary of a report produced by any command.
pub fn render(report: &Value) -> Result<String> {
    if report.as_object().is_none_or(|o| o.is_empty()) {
        bail!("empty report");
    }
    let mut out = String::new();
    match text(report, "command")? {
        "check-operator" => check_operator(report, &mut out)?,
        "korn" => korn(report, &mut out)?,
        "counterexample" => counterexample(report, &mut out)?,
        "quasiconvexity" => quasiconvexity(report, &mut out)?,
        "minimize" => minimize(report, &mut out)?,
        other => bail!("malformed report: unknown command `{other}`"),
    }
    Ok(out)
}

fn check_operator(r: &Value, out: &mut String) -> Result<()> {
    let ell = field(r, "ellipticity")?;
    writeln!(out, "operator: {}", text(r, "label")?)?;
    writeln!(out, "elliptic: {} (min σ = {:.6e}, threshold {:.3e})  {ELLIPTICITY}", flag(r, "elliptic")?, num(ell, "min_sigma")?, num(ell, "threshold")?)?;
    if !flag(r, "elliptic")? {
        writeln!(out, "  witness: xi' = {}", vector(field(ell, "witness_xi")?))?;
        writeln!(out, "           v = {}", vector(field(ell, "witness_kernel_vector")?))?;
    }
    let rank = match field(ell, "rank_value")?.as_u64() {
        Some(k) => format!("rank {k}"),
        None => format!("rank between {} and {}", field(ell, "min_rank")?, field(ell, "max_rank")?),
    };
    writeln!(out, "constant rank: {} ({rank})  {CONSTANT_RANK}", flag(r, "constant_rank")?)?;
    writeln!(out, "essential range dimension: {}", field(r, "essential_range_dim")?)?;
    let red = field(r, "reduction")?;
    if !red.is_null() {
        writeln!(
            out,
            "reduction: range dim {} in derivative space of dim {}, singular values {}  {REDUCTION}",
            field(red, "range_dim")?,
            field(red, "derivative_space_dim")?,
            vector(field(red, "singular_values")?)
        )?;
    }
    if let Some(ex) = r.get("exactness").filter(|e| !e.is_null()) {
        writeln!(
            out,
            "exactness with {}: {} (max residual {:.3e}, {} failures in {} samples)  {EXACTNESS}",
            text(ex, "annihilator")?,
            flag(ex, "exact")?,
            num(ex, "max_residual")?,
            field(ex, "failures")?,
            field(ex, "samples")?
        )?;
    }
    Ok(())
}

fn korn(r: &Value, out: &mut String) -> Result<()> {
    writeln!(out, "operator: {} (elliptic: {})", text(r, "label")?, flag(r, "elliptic")?)?;
    writeln!(out, "psi: {}  grid: {}  cutoff: {}  fields: {}", text(r, "psi")?, field(r, "grid")?, field(r, "cutoff")?, field(r, "fields")?)?;
    writeln!(
        out,
        "ratio: max {:.6} (field {})  mean {:.6}  min {:.6}  {KORN}",
        num(r, "max_ratio")?,
        field(r, "argmax_field")?,
        num(r, "mean_ratio")?,
        num(r, "min_ratio")?
    )?;
    Ok(())
}

fn counterexample(r: &Value, out: &mut String) -> Result<()> {
    let recipe = field(r, "recipe")?;
    writeln!(out, "operator: {}  psi: {}  {COUNTEREXAMPLE}", text(r, "label")?, text(r, "psi")?)?;
    writeln!(out, "  xi' = {}", vector(field(recipe, "xi_prime")?))?;
    writeln!(out, "  v = {}  (|A[xi'] v| = {:.3e})", vector(field(recipe, "v")?), num(recipe, "symbol_residual")?)?;
    writeln!(out, "{:>4}  {:>14}  {:>14}  {:>14}", "i", "lhs", "rhs", "ratio")?;
    for row in field(r, "rows")?.as_array().ok_or_else(|| anyhow!("malformed report: `rows` is not a list"))? {
        let i = field(row, "i")?.as_u64().ok_or_else(|| anyhow!("malformed report: row index is not an integer"))?;
        writeln!(out, "{i:>4}  {:>14.6e}  {:>14.6e}  {:>14.6e}", num(row, "lhs")?, num(row, "rhs")?, num(row, "ratio")?)?;
    }
    writeln!(
        out,
        "ratios increasing: {}  rhs decreasing: {}  growth {:.3}  fitted exponent {:.3} (predicted {})",
        flag(r, "ratios_increasing")?,
        flag(r, "rhs_decreasing")?,
        num(r, "growth")?,
        num(r, "fitted_exponent")?,
        num(r, "predicted_exponent")?
    )?;
    Ok(())
}

fn hypotheses(h: &Value, out: &mut String) -> Result<()> {
    writeln!(out, "hypotheses  {HYPOTHESES}")?;
    for c in field(h, "checks")?.as_array().ok_or_else(|| anyhow!("malformed report: `checks` is not a list"))? {
        if !flag(c, "applicable")? {
            writeln!(out, "  {:<20} n/a", text(c, "name")?)?;
            continue;
        }
        let verdict = if flag(c, "passed")? { "ok" } else { "VIOLATED" };
        writeln!(out, "  {:<20} {verdict:<8} worst {:.4e} vs bound {:.4e}", text(c, "name")?, num(c, "worst")?, num(c, "bound")?)?;
        if !flag(c, "passed")? {
            if let Some(w) = c.get("witness").filter(|w| !w.is_null()) {
                writeln!(out, "    witness: x = {}, z = {}", vector(field(w, "x")?), vector(field(w, "z")?))?;
            }
        }
    }
    Ok(())
}

fn quasiconvexity(r: &Value, out: &mut String) -> Result<()> {
    let qc = field(r, "quasiconvexity")?;
    writeln!(out, "operator: {}  integrand: {}", text(r, "label")?, text(qc, "integrand")?)?;
    hypotheses(field(r, "hypotheses")?, out)?;
    writeln!(out, "verdict: {} (nu = {:.6e} over {} samples)  {QUASICONVEXITY}", text(r, "verdict")?, num(qc, "nu")?, field(qc, "samples")?)?;
    let w = field(qc, "witness")?;
    writeln!(out, "  witness: z = {}, test field {}, increment {:.4e}", vector(field(w, "z")?), field(w, "field_index")?, num(w, "increment")?)?;
    Ok(())
}

fn minimize(r: &Value, out: &mut String) -> Result<()> {
    writeln!(out, "operator: {}  integrand: {}", text(r, "label")?, text(r, "integrand")?)?;
    hypotheses(field(r, "hypotheses")?, out)?;
    writeln!(
        out,
        "energy: {:.12e}  iterations: {}  converged: {}  gradient sup {:.3e}  {DIRECT_METHOD}",
        num(r, "energy")?,
        field(r, "iterations")?,
        flag(r, "converged")?,
        num(r, "gradient_sup")?
    )?;
    let lm = field(r, "local_minimality")?;
    if !lm.is_null() {
        writeln!(
            out,
            "local minimality: {} (min increment {:.3e} over {} perturbations of size {:.1e})",
            flag(lm, "passed")?,
            num(lm, "min_increment")?,
            field(lm, "samples")?,
            num(lm, "amplitude")?
        )?;
    }
    let reg = field(r, "regularity")?;
    if let Some(msg) = reg.get("skipped") {
        writeln!(out, "regularity: skipped ({})  {REGULARITY}", msg.as_str().unwrap_or_default())?;
    } else {
        let alpha = field(reg, "alpha_estimate")?.as_f64().map(|a| format!("{a:.3}")).unwrap_or_else(|| "n/a".into());
        writeln!(out, "regularity: singular fraction {:.4}  excess exponent {alpha}  {REGULARITY}", num(reg, "singular_fraction")?)?;
    }
    Ok(())
}
