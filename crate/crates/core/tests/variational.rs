use std::sync::Arc;

use aqc_core::counterexamples::{nonsmooth_kernel_field, RoughProfile};
use aqc_core::operators::*;
use aqc_core::variational::*;
use aqc_core::spectral;

fn vp(p: f64) -> Arc<dyn Integrand> {
    Arc::new(VpIntegrand::new(p).unwrap())
}

fn nonincreasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] + 1e-14 * w[0].abs())
}

#[test]
fn div_curl_minimizer_is_reproducible_from_perturbed_starts() {
    let op = div_curl::<f64>();
    let datum = sinusoidal_datum(&[16, 16, 16], 3, 0.5, 1.0).unwrap();
    let problem = EnergyProblem::dirichlet(&op, vp(3.0), &datum).unwrap();
    let first = minimize(&problem, None, &SolverConfig::default()).unwrap();
    assert!(first.converged);
    assert!(nonincreasing(&first.trace));
    // strict decrease until rounding takes over
    let e = first.energy;
    assert!(first.trace.windows(2).all(|w| w[1] < w[0] || w[0] - e <= 1e-12 * e));
    let cfg = SolverConfig { start_perturbation: 0.1, seed: 4, ..Default::default() };
    let second = minimize(&problem, None, &cfg).unwrap();
    assert!(second.converged);
    assert!((second.energy - first.energy).abs() <= 1e-6 * first.energy);
}

#[test]
fn converged_minimizer_is_a_local_minimum() {
    let op = symmetric_gradient::<f64>(2);
    let datum = sinusoidal_datum(&[32, 32], 2, 1.0, 1.0).unwrap();
    let problem = EnergyProblem::dirichlet(&op, vp(3.0), &datum).unwrap();
    let run = minimize(&problem, None, &SolverConfig::default()).unwrap();
    assert!(run.converged);
    let report = local_minimality(&problem, &run.field, 50, 1e-3, 7).unwrap();
    assert!(report.passed(1e-9), "{report:?}");
}

#[test]
fn quadratic_minimizer_with_smooth_data_is_regular() {
    let op = symmetric_gradient::<f64>(2);
    let datum = sinusoidal_datum(&[64, 64], 2, 1.0, 1.0).unwrap();
    let problem = EnergyProblem::dirichlet(&op, vp(2.0), &datum).unwrap();
    let run = minimize(&problem, None, &SolverConfig::default()).unwrap();
    let report = regularity_diagnostic(&run.field, &op, &RegularityConfig::default()).unwrap();
    assert_eq!(report.singular_fraction, 0.0);
}

#[test]
fn kernel_fields_of_non_elliptic_operators_have_a_jump_set() {
    for (op, shape) in [(partial::<f64>(2, 0), vec![64, 64]), (curl::<f64>(3), vec![32, 32, 32])] {
        let k = nonsmooth_kernel_field(&op, &RoughProfile::Step { at: 0.1 }, &shape).unwrap();
        let report = regularity_diagnostic(&k.field, &op, &RegularityConfig::default()).unwrap();
        assert!(report.singular_fraction >= 0.1, "{}: {}", op.label(), report.singular_fraction);
        assert!(report.singular_fraction < 1.0);
    }
}

#[test]
fn gradient_operator_pipeline_is_unchanged_by_the_reduction() {
    let op = gradient::<f64>(2, 2);
    let f = vp(3.0);
    let g: Arc<dyn Integrand> = Arc::new(reduce_integrand(f.clone(), &op).unwrap());
    let datum = sinusoidal_datum(&[16, 16], 2, 0.8, 1.0).unwrap();
    let plain = minimize(&EnergyProblem::dirichlet(&op, f, &datum).unwrap(), None, &SolverConfig::default()).unwrap();
    let reduced = minimize(&EnergyProblem::dirichlet(&op, g, &datum).unwrap(), None, &SolverConfig::default()).unwrap();
    assert_eq!(plain.energy.to_bits(), reduced.energy.to_bits());
    assert_eq!(plain.field.values(), reduced.field.values());
    assert_eq!(plain.trace, reduced.trace);
}

#[test]
fn energies_do_not_depend_on_the_thread_count() {
    let op = symmetric_gradient::<f64>(2);
    let problem = EnergyProblem::periodic(&op, vp(3.0), &[64, 64], Some(vec![0.1, 0.0, 0.0, 0.2])).unwrap();
    let u = spectral::random_band_limited::<f64>(&[64, 64], 2, 8, 1.0, 3).unwrap();
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| problem.energy_and_gradient(&u).unwrap());
    let b = wide.install(|| problem.energy_and_gradient(&u).unwrap());
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1.values(), b.1.values());
}

#[test]
fn coercivity_holds_for_vp_and_fails_for_bounded_integrands() {
    let op = symmetric_gradient::<f64>(2);
    let datum = sinusoidal_datum(&[16, 16], 2, 0.5, 1.0).unwrap();
    let phis = localized_test_fields(&[16, 16], 2, 100, 2).unwrap();
    let good = EnergyProblem::dirichlet(&op, vp(2.0), &datum).unwrap();
    let r = coercivity_diagnostic(&good, &phis, &[1.0, 10.0, 100.0]).unwrap();
    assert!(r.constant.is_finite() && !r.diverges);
    assert_eq!(r.samples, 300);
    let bad = EnergyProblem::dirichlet(&op, Arc::new(BoundedIntegrand), &datum).unwrap();
    let r = coercivity_diagnostic(&bad, &phis[..10], &[1.0, 10.0, 100.0]).unwrap();
    assert!(r.diverges);
}

#[test]
fn hypothesis_checks_match_the_integrand_catalog() {
    let eps = symmetric_gradient::<f64>(2);
    assert!(check_hypotheses(&VpIntegrand::new(2.0).unwrap(), &eps, 200, 1).unwrap().passed());
    let concave = check_hypotheses(&ConcaveQuadratic, &eps, 200, 1).unwrap();
    assert!(!concave.passed());
    assert!(concave.get("rank_one_convexity").unwrap().witness.is_some());
    let holder = check_hypotheses(&NonAutonomousVp::new(2.0, 0.3).unwrap(), &eps, 200, 1).unwrap();
    assert!(holder.get("x_modulus").unwrap().passed);
}

#[test]
fn problem_files_drive_the_minimizer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.json");
    std::fs::write(
        &path,
        r#"{
            "operator": "symmetric_gradient:2",
            "integrand": {"kind": "vp", "p": 2.0},
            "domain": {"type": "dirichlet", "shape": [16, 16],
                       "datum": {"kind": "affine", "matrix": [[1.0, 0.5], [0.0, -1.0]]}},
            "solver": {"max_iter": 100, "tol": 1e-10, "seed": 0}
        }"#,
    )
    .unwrap();
    let (problem, solver) = load_problem(&path).unwrap();
    let run = minimize(&problem, None, &solver).unwrap();
    assert!(run.converged);
    assert_eq!(run.iterations, 0);
    assert!(run.field.relative_l2_error(&problem.initial_field()).unwrap() < 1e-12);
}
