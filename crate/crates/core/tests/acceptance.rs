//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ntrack_core::algorithms::{
    centralized_reference, trajectory, DecentralizedMethod, NewtonTracking, PrimalDual, SqForm, StackedVector,
    REFERENCE_TOL,
};
use ntrack_core::analysis::{contraction_check, error_bound_check, fit_linear_rate, optimal_dual, rate_certificate};
use ntrack_core::harness::{build_problem, preset, run_experiment, topology_sweep, RunRecord};
use ntrack_core::objectives::{
    convexity_bounds, derivative_check, generate_logistic_data, generate_quadratic_terms, ObjectiveSet,
};
use ntrack_core::topology::{
    build_topology, metropolis_weights, spectral_stats, MixingMatrix, SpectralStats, TopologyKind,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

type Problem = (ObjectiveSet, MixingMatrix, SpectralStats);

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn quadratic(n: usize, p: usize, kind: TopologyKind, curvature: (f64, f64), seed: u64) -> Problem {
    let f = ObjectiveSet::quadratic(generate_quadratic_terms(n, p, curvature, seed).unwrap()).unwrap();
    let w = metropolis_weights(&build_topology(kind, n, 1.0, 0).unwrap());
    let s = spectral_stats(&w).unwrap();
    (f, w, s)
}

fn logistic_preset() -> Problem {
    let p = build_problem(&preset("logistic-n10").unwrap()).unwrap();
    (p.objectives, p.mixing, p.spectra)
}

fn max_deviation(a: &StackedVector, b: &StackedVector) -> f64 {
    (a - b).max_abs()
}

fn formulation_equivalence() -> Outcome {
    let clock = Instant::now();
    let mut worst = 0.0f64;
    let cases = [
        (quadratic(3, 2, TopologyKind::Line, (0.5, 3.0), 3), 0.8, 2.0),
        (logistic_preset(), 3.3, 3.0),
    ];
    for ((f, w, s), alpha, eps) in &cases {
        let nt = trajectory(&NewtonTracking::init(f, w, *alpha, *eps).unwrap(), f, w, 100).unwrap();
        let pd = trajectory(&PrimalDual::init(f, s, *alpha, *eps).unwrap(), f, w, 100).unwrap();
        let sq = trajectory(&SqForm::init(f, w, *alpha, *eps).unwrap(), f, w, 100).unwrap();
        for t in 0..=100 {
            worst = worst
                .max(max_deviation(nt[t].iterate(), pd[t].iterate()))
                .max(max_deviation(nt[t].iterate(), sq[t].iterate()));
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 5.0,
        format!("max |x_nt - x_pd|, |x_nt - x_sq| = {worst:.2e} over 100 iterations, {secs:.2} s"),
    )
}

fn conservation_identity() -> Outcome {
    let (f, w, _) = logistic_preset();
    let mut nt = NewtonTracking::init(&f, &w, 3.3, 3.0).unwrap();
    let mut worst = nt.conservation_residual();
    for _ in 0..1000 {
        nt = nt.step(&f, &w).unwrap();
        worst = worst.max(nt.conservation_residual());
    }
    outcome(
        worst < 1e-9,
        format!("worst relative residual {worst:.2e} over 1000 iterations"),
    )
}

fn g_norm_contraction() -> Outcome {
    let (f, w, s) = quadratic(10, 2, TopologyKind::Complete, (1.0, 1.0), 1);
    let bounds = convexity_bounds(&f).unwrap();
    let cert = rate_certificate(&bounds, &s, 0.1, 5.0, 2.0, 2.0).unwrap();
    let star = centralized_reference(&f, REFERENCE_TOL).unwrap();
    let v_star = optimal_dual(&f, &s, star.x.as_slice());
    let traj = trajectory(&PrimalDual::init(&f, &s, 0.1, 5.0).unwrap(), &f, &w, 200).unwrap();
    let report = contraction_check(&traj, &cert, &w, star.x.as_slice(), &v_star).unwrap();
    let delta = cert.delta.unwrap_or(f64::NAN);
    outcome(
        report.passed() && report.steps == 200 && (delta - 0.18367).abs() < 1e-5,
        format!(
            "delta = {delta:.5}, delta' = {:.3e}, {} violations in {} steps, worst ratio {:.4} vs bound {:.6}",
            cert.delta_prime.unwrap_or(f64::NAN),
            report.violations,
            report.steps,
            report.worst_ratio,
            report.factor
        ),
    )
}

fn error_vector_bound() -> Outcome {
    let mut violations = 0;
    let mut details = Vec::new();
    let cases = [
        (
            "quadratic",
            quadratic(6, 3, TopologyKind::Cycle, (0.5, 2.0), 4),
            0.4,
            2.0,
        ),
        ("logistic", logistic_preset(), 3.3, 3.0),
    ];
    for (name, (f, w, s), alpha, eps) in &cases {
        let nt = trajectory(&NewtonTracking::init(f, w, *alpha, *eps).unwrap(), f, w, 100).unwrap();
        let pd = trajectory(&PrimalDual::init(f, s, *alpha, *eps).unwrap(), f, w, 100).unwrap();
        let a = error_bound_check(&nt, f, w, *alpha).unwrap();
        let b = error_bound_check(&pd, f, w, *alpha).unwrap();
        violations += a.violations + b.violations;
        details.push(format!("{name}: worst ratio {:.3}", a.worst_ratio.max(b.worst_ratio)));
    }
    outcome(
        violations == 0,
        format!("{violations} violations; {}", details.join(", ")),
    )
}

fn spectral_reproduction() -> Outcome {
    // (kind, closed form, two-decimal reference values)
    let cases = [
        (TopologyKind::Line, (1.3007, 0.0326), (1.30, 0.03)),
        (TopologyKind::Cycle, (1.3333, 0.1273), (1.33, 0.12)),
        (TopologyKind::Complete, (1.0, 1.0), (1.00, 1.00)),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (kind, exact, rounded) in cases {
        let s = spectral_stats(&metropolis_weights(&build_topology(kind, 10, 1.0, 0).unwrap())).unwrap();
        let (lmax, gap) = (s.lambda_max, s.lambda_hat_min.unwrap());
        ok &= (lmax - exact.0).abs() < 5e-5 && (gap - exact.1).abs() < 5e-5;
        // reference values are truncated to two decimals
        ok &= (lmax - rounded.0).abs() < 0.01 && (gap - rounded.1).abs() < 0.01;
        details.push(format!("{kind} ({lmax:.4}, {gap:.4})"));
    }
    outcome(ok, details.join(", "))
}

fn linear_convergence(logistic_record: &RunRecord) -> Outcome {
    let trace = &logistic_record.runs[0].trace;
    let hit = trace.first_below(1e-8);
    match trace.fit_rate() {
        Ok(fit) => outcome(
            hit.is_some_and(|t| t <= 2000) && fit.slope < 0.0 && fit.r_squared >= 0.99,
            format!(
                "1e-8 at iteration {hit:?}, slope {:.4} decades/iter, R^2 {:.5}",
                fit.slope, fit.r_squared
            ),
        ),
        Err(e) => outcome(false, format!("1e-8 at iteration {hit:?}, fit failed: {e}")),
    }
}

fn baseline_agreement(record: &RunRecord) -> Outcome {
    let scale = StackedVector::replicate(record.config.topology.n, &record.x_star).norm();
    let mut ok = true;
    let mut details = Vec::new();
    for label in ["gradient_tracking", "extra", "dlm"] {
        let trace = &record.run(label).unwrap().trace;
        let hit = trace.first_below(1e-6);
        let distance = trace.final_error().unwrap_or(f64::INFINITY) * scale;
        ok &= hit.is_some_and(|t| t <= 20000) && distance <= 1e-5;
        details.push(format!(
            "{label}: 1e-6 at {}, final distance {distance:.1e}",
            hit.map_or("never".to_string(), |t| t.to_string())
        ));
    }
    outcome(ok, details.join("; "))
}

fn iteration_ordering(record: &RunRecord) -> Outcome {
    let hit = |label: &str| record.run(label).unwrap().trace.first_below(1e-6);
    let nt = hit("newton_tracking");
    let mut ok = nt.is_some();
    let mut details = vec![format!("newton_tracking {nt:?}")];
    for label in ["gradient_tracking", "extra", "dlm"] {
        let other = hit(label);
        // a method that never gets there needs more iterations than any that does
        ok &= match (nt, other) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            _ => false,
        };
        details.push(format!("{label} {other:?}"));
    }
    outcome(ok, format!("first iteration at 1e-6: {}", details.join(", ")))
}

fn topology_ordering() -> Outcome {
    let config = preset("topology-sweep").unwrap();
    let records = topology_sweep(&config, &config.sweep).unwrap();
    let mut rows = Vec::new();
    for (entry, record) in config.sweep.iter().zip(&records) {
        let trace = &record.runs[0].trace;
        let slope = trace.fit_rate().map(|f| f.slope).unwrap_or(f64::NAN);
        rows.push((
            entry.label(),
            record.spectra.lambda_hat_min.unwrap(),
            trace.first_below(1e-8),
            slope,
        ));
    }
    let hits = |name: &str| rows.iter().find(|r| r.0 == name).and_then(|r| r.2);
    let complete = hits("complete");
    let fastest = complete.is_some_and(|c| ["line", "cycle"].iter().all(|k| hits(k).is_none_or(|t| c < t)));
    let mut by_gap = rows.clone();
    by_gap.sort_by(|a, b| a.1.total_cmp(&b.1));
    let monotone = by_gap.windows(2).all(|p| p[1].3 < p[0].3);
    let summary: Vec<String> = by_gap
        .iter()
        .map(|(name, gap, hit, slope)| format!("{name} gap {gap:.3} slope {slope:.4} 1e-8@{hit:?}"))
        .collect();
    outcome(fastest && monotone, summary.join("; "))
}

fn scalar_sanity() -> Outcome {
    let f = ObjectiveSet::quadratic(vec![(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -1.0))]).unwrap();
    let w = metropolis_weights(&build_topology(TopologyKind::Line, 1, 1.0, 0).unwrap());
    let traj = trajectory(&NewtonTracking::init(&f, &w, 1.0, 1.0).unwrap(), &f, &w, 40).unwrap();
    let xs: Vec<f64> = traj.iter().map(|s| s.iterate().as_slice()[0]).collect();
    let head_ok = xs
        .iter()
        .zip([0.0, 0.5, 0.75, 0.875])
        .all(|(x, e)| (x - e).abs() < 1e-15);
    let errors: Vec<f64> = xs.iter().map(|x| (x - 1.0).abs()).collect();
    let fit = fit_linear_rate(&errors, 0..errors.len()).unwrap();
    let off = (fit.slope - 0.5f64.log10()).abs();
    outcome(
        head_ok && off <= 1e-6,
        format!("iterates {:?}, slope {:.8} (|diff| {off:.1e})", &xs[..4], fit.slope),
    )
}

fn derivative_checks() -> Outcome {
    let data = generate_logistic_data(10, 12, 8, 0.001, 1).unwrap();
    let f = ObjectiveSet::logistic(&data).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_g = 0.0f64;
    let mut worst_h = 0.0f64;
    let mut failures = 0;
    for k in 0..20 {
        let node = rng.random_range(0..f.node_count());
        let x: Vec<f64> = (0..f.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let report = derivative_check(f.local(node), &x, 1e-5).unwrap();
        worst_g = worst_g.max(report.gradient_error);
        worst_h = worst_h.max(report.hessian_error);
        if !report.passed() {
            failures += 1;
            eprintln!("point {k} at node {node} failed: {report:?}");
        }
    }
    outcome(
        failures == 0,
        format!("20 points, worst gradient error {worst_g:.1e}, worst Hessian error {worst_h:.1e}"),
    )
}

fn main() -> ExitCode {
    let clock = Instant::now();
    let logistic_record = run_experiment(&preset("logistic-n10").unwrap()).unwrap();
    let compare_record = run_experiment(&preset("compare-n50").unwrap()).unwrap();

    let criteria: Vec<Criterion> = vec![
        ("formulation equivalence", Box::new(formulation_equivalence)),
        ("conservation identity", Box::new(conservation_identity)),
        ("G-norm contraction", Box::new(g_norm_contraction)),
        ("error-vector bound", Box::new(error_vector_bound)),
        ("spectral reproduction", Box::new(spectral_reproduction)),
        ("linear convergence", Box::new(|| linear_convergence(&logistic_record))),
        ("baseline agreement", Box::new(|| baseline_agreement(&compare_record))),
        (
            "iteration-count ordering",
            Box::new(|| iteration_ordering(&compare_record)),
        ),
        ("topology ordering", Box::new(topology_ordering)),
        ("scalar sanity", Box::new(scalar_sanity)),
        ("derivative checks", Box::new(derivative_checks)),
    ];

    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        let status = if result.passed { "PASS" } else { "FAIL" };
        if !result.passed {
            failed += 1;
        }
        println!("criterion {:>2} {status} {name}: {}", k + 1, result.detail);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        clock.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
