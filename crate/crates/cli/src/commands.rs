use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use aqc_core::counterexamples::{build_plane_wave_sequence, experiment_tsv, korn_failure_experiment, plane_wave_recipe};
use aqc_core::multipliers::korn_modular_ratio;
use aqc_core::operators::{
    builtin, check_ellipticity, check_exactness, default_sphere_samples, essential_range, reduce_to_gradient_form,
};
use aqc_core::variational::{
    check_hypotheses, local_minimality, localized_test_fields, minimize, range_samples, regularity_diagnostic,
    test_strong_quasiconvexity, IntegrandDef, ProblemDef, RegularityConfig, Verdict,
};
use aqc_core::{rng, spectral, Error, GridField, NFunction, Operator};

use crate::{Cli, Command, Outcome};

const EXACTNESS_SAMPLES: usize = 4096;
const MINIMALITY_AMPLITUDE: f64 = 1e-3;
const MINIMALITY_TOL: f64 = 1e-9;

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::CheckOperator { op, samples, annihilator } => {
            let a = op.load()?;
            let mut out = check_operator(&a, *samples, annihilator.as_deref())?;
            out.report["source"] = op.source();
            Ok(out)
        }
        Command::Korn { op, psi, grid, fields, cutoff } => {
            let a = op.load()?;
            let mut out = korn(&a, psi, *grid, *fields, *cutoff, seed)?;
            out.report["source"] = op.source();
            Ok(out)
        }
        Command::Counterexample { op, psi, imax, grid } => {
            let a = op.load()?;
            let mut out = counterexample(&a, psi, *imax, *grid)?;
            out.report["source"] = op.source();
            Ok(out)
        }
        Command::Quasiconvexity { op, integrand, grid, fields, samples } => {
            let a = op.load()?;
            let mut out = quasiconvexity(&a, integrand, *grid, *fields, *samples, seed)?;
            out.report["source"] = op.source();
            Ok(out)
        }
        Command::Minimize { problem, fields, samples } => minimize_problem(problem, *fields, *samples, cli.seed),
        Command::Render { .. } => unreachable!("render is handled before dispatch"),
    }
}

fn check_operator(op: &Operator, samples: Option<usize>, annihilator: Option<&str>) -> Result<Outcome> {
    let samples = samples.unwrap_or_else(|| default_sphere_samples(op.n()));
    let ell = check_ellipticity(op, samples)?;
    let range = essential_range(op);
    let reduction = if ell.elliptic {
        let red = reduce_to_gradient_form(op)?;
        let isometry = red.singular_values.iter().all(|s| (s - 1.0).abs() < 1e-12);
        json!({
            "derivative_space_dim": red.projection.ncols(),
            "range_dim": red.singular_values.len(),
            "singular_values": red.singular_values,
            "projection_idempotent": isometry,
        })
    } else {
        Value::Null
    };
    let exactness = match annihilator {
        Some(name) => {
            let b: Operator = builtin(name)?;
            Some(check_exactness(op, &b, EXACTNESS_SAMPLES)?)
        }
        None => None,
    };
    let violation = !ell.elliptic || !ell.constant_rank || exactness.as_ref().is_some_and(|e| !e.exact);
    let report = json!({
        "command": "check-operator",
        "operator": op,
        "label": op.label(),
        "elliptic": ell.elliptic,
        "constant_rank": ell.constant_rank,
        "ellipticity": ell,
        "essential_range_dim": range.dim,
        "reduction": reduction,
        "exactness": exactness,
    });
    Ok(Outcome { report, violation, artifacts: Vec::new() })
}

fn korn(op: &Operator, psi: &str, grid: usize, fields: usize, cutoff: Option<usize>, seed: u64) -> Result<Outcome> {
    if fields == 0 {
        bail!("--fields must be positive");
    }
    let psi_fn = NFunction::parse(psi)?;
    let shape = vec![grid; op.n()];
    let cutoff = cutoff.unwrap_or_else(|| spectral::default_cutoff(&shape));
    let elliptic = check_ellipticity(op, default_sphere_samples(op.n()))?.elliptic;
    let mut rows = Vec::with_capacity(fields);
    for k in 0..fields {
        let u: GridField<f64> = spectral::random_band_limited(&shape, op.dim_v(), cutoff, 1.0, rng::child(seed, k as u64))?;
        rows.push(korn_modular_ratio(op, &psi_fn, &u)?);
    }
    let (argmax, max) = rows
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(i, m), (k, r)| if r.ratio > m { (k, r.ratio) } else { (i, m) });
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let mean = rows.iter().map(|r| r.ratio).sum::<f64>() / fields as f64;
    let mut tsv = String::from("# field\tlhs\trhs\tratio\n");
    for (k, r) in rows.iter().enumerate() {
        tsv.push_str(&format!("{k}\t{:.12e}\t{:.12e}\t{:.12e}\n", r.lhs, r.rhs, r.ratio));
    }
    let report = json!({
        "command": "korn",
        "operator": op,
        "label": op.label(),
        "elliptic": elliptic,
        "psi": psi_fn.label(),
        "grid": shape,
        "cutoff": cutoff,
        "fields": fields,
        "seed": seed,
        "max_ratio": max,
        "argmax_field": argmax,
        "min_ratio": min,
        "mean_ratio": mean,
    });
    Ok(Outcome { report, violation: false, artifacts: vec![("korn_ratios.tsv".into(), tsv.into_bytes())] })
}

fn counterexample(op: &Operator, psi: &str, imax: usize, grid: Option<usize>) -> Result<Outcome> {
    if imax < 2 {
        bail!("--imax must be at least 2");
    }
    let psi_fn = NFunction::parse(psi)?;
    let recipe = plane_wave_recipe(op, psi_fn.exponent())?;
    let rows = korn_failure_experiment(op, &psi_fn, imax)?;
    let increasing = rows.windows(2).all(|w| w[1].ratio > w[0].ratio);
    let rhs_decreasing = rows.windows(2).all(|w| w[1].rhs < w[0].rhs);
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let prev = &rows[rows.len() - 2];
    let fitted = (last.ratio / prev.ratio).ln() / (last.i as f64 / prev.i as f64).ln();
    let mut artifacts = vec![("counterexample.tsv".to_string(), experiment_tsv(&rows).into_bytes())];
    if let Some(s) = grid {
        let field = build_plane_wave_sequence(&recipe, imax, s)?;
        let mut bytes = Vec::new();
        field.write_to(&mut bytes)?;
        artifacts.push((format!("plane_wave_{imax}.aqcf"), bytes));
    }
    let report = json!({
        "command": "counterexample",
        "operator": op,
        "label": op.label(),
        "psi": psi_fn.label(),
        "imax": imax,
        "recipe": recipe,
        "rows": rows,
        "ratios_increasing": increasing,
        "rhs_decreasing": rhs_decreasing,
        "growth": last.ratio / first.ratio,
        "fitted_exponent": fitted,
        "predicted_exponent": psi_fn.exponent(),
    });
    Ok(Outcome { report, violation: false, artifacts })
}

/// `vp:P`, `nonautonomous:P:SIGMA`, `concave_quadratic`, `det_plus_vp:MU[:P]`, `bounded`.
pub fn parse_integrand(spec: &str) -> Result<IntegrandDef> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let num = |s: &str| -> Result<f64> { s.parse::<f64>().with_context(|| format!("bad number `{s}` in integrand `{spec}`")) };
    let mut def = IntegrandDef { kind: parts[0].to_string(), name: None, p: None, sigma: None, mu: None };
    match parts.as_slice() {
        ["vp", p] => def.p = Some(num(p)?),
        ["nonautonomous", p, s] => {
            def.p = Some(num(p)?);
            def.sigma = Some(num(s)?);
        }
        ["concave_quadratic"] | ["bounded"] => {}
        ["det_plus_vp", mu] => def.mu = Some(num(mu)?),
        ["det_plus_vp", mu, p] => {
            def.mu = Some(num(mu)?);
            def.p = Some(num(p)?);
        }
        _ => bail!("unknown integrand spec `{spec}`"),
    }
    Ok(def)
}

fn quasiconvexity(op: &Operator, spec: &str, grid: usize, fields: usize, samples: usize, seed: u64) -> Result<Outcome> {
    let def = parse_integrand(spec)?;
    let f = def.build()?;
    let hyp = check_hypotheses(f.as_ref(), op, samples, seed)?;
    let zs = range_samples(op, &[0.0, 1.0, 10.0], 4, seed);
    let phis = localized_test_fields(&vec![grid; op.n()], op.dim_v(), fields, seed)?;
    let qc = test_strong_quasiconvexity(f.as_ref(), op, &zs, &phis)?;
    let violation = !hyp.passed() || qc.verdict == Verdict::Violates;
    let report = json!({
        "command": "quasiconvexity",
        "operator": op,
        "label": op.label(),
        "integrand": def,
        "grid": grid,
        "fields": fields,
        "seed": seed,
        "hypotheses_passed": hyp.passed(),
        "hypotheses": hyp,
        "verdict": qc.verdict,
        "quasiconvexity": qc,
    });
    Ok(Outcome { report, violation, artifacts: Vec::new() })
}

fn minimize_problem(path: &Path, fields: usize, samples: usize, seed: Option<u64>) -> Result<Outcome> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut def = ProblemDef::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(s) = seed {
        def.solver.seed = s;
    }
    let seed = def.solver.seed;
    let (problem, solver) = def.build(path.parent().unwrap_or(Path::new(".")))?;
    let op = def.operator.build()?;
    let f = def.integrand.build()?;
    let hyp = check_hypotheses(f.as_ref(), &op, samples, seed)?;
    let run = minimize(&problem, None, &solver)?;

    let regularity = match regularity_diagnostic(&run.field, &op, &RegularityConfig::default()) {
        Ok(r) => serde_json::to_value(r)?,
        Err(e @ Error::GridTooSmall { .. }) => json!({ "skipped": e.to_string() }),
        Err(e) => return Err(e.into()),
    };
    let minimality = if fields > 0 {
        let r = local_minimality(&problem, &run.field, fields, MINIMALITY_AMPLITUDE, seed)?;
        let passed = r.passed(MINIMALITY_TOL * (1.0 + run.energy.abs()));
        let mut v = serde_json::to_value(r)?;
        v["passed"] = json!(passed);
        v
    } else {
        Value::Null
    };

    let mut trace = String::from("# step\tenergy\n");
    for (k, e) in run.trace.iter().enumerate() {
        trace.push_str(&format!("{k}\t{e:.15e}\n"));
    }
    let mut field = Vec::new();
    run.field.write_to(&mut field)?;

    let report = json!({
        "command": "minimize",
        "problem": def,
        "label": op.label(),
        "integrand": f.label(),
        "seed": seed,
        "energy": run.energy,
        "iterations": run.iterations,
        "converged": run.converged,
        "gradient_sup": run.gradient_sup,
        "trace_length": run.trace.len(),
        "hypotheses_passed": hyp.passed(),
        "hypotheses": hyp,
        "regularity": regularity,
        "local_minimality": minimality,
    });
    Ok(Outcome {
        report,
        violation: !hyp.passed(),
        artifacts: vec![("trace.tsv".into(), trace.into_bytes()), ("minimizer.aqcf".into(), field)],
    })
}
