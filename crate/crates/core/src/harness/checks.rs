use serde::{Deserialize, Serialize};

use super::run::{AlgorithmRun, RunRecord};
use crate::analysis::{CONTRACTION_SLACK, ERROR_BOUND_SLACK};

/// Largest relative conservation residual tolerated along a trace.
pub const TRACKING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Label of the checked method run.
    pub run: String,
    pub passed: bool,
    pub violations: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub detail: String,
}

fn result(name: &str, run: &AlgorithmRun, violations: usize, worst: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        run: run.label.clone(),
        passed: violations == 0,
        violations,
        worst,
        detail,
    }
}

/// Invariant suites over the recorded traces. Only suites whose columns are
/// present run, so a record without analysis data yields the basic checks.
pub fn check_record(record: &RunRecord) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for run in &record.runs {
        let rows = &run.trace.rows;

        if let Some(first) = rows.first() {
            let off = (first.rel_error - 1.0).abs();
            let bad = usize::from(off > 1e-12 && record.x_star.iter().any(|&v| v != 0.0));
            out.push(result(
                "initial_error",
                run,
                bad,
                first.rel_error,
                "relative error at t = 0 is 1".into(),
            ));
        }

        out.push(result(
            "bounded",
            run,
            usize::from(run.trace.diverged),
            run.trace.final_error().unwrap_or(0.0),
            "trace stayed finite and below the divergence limit".into(),
        ));

        let tracking: Vec<f64> = rows.iter().filter_map(|r| r.tracking_residual).collect();
        if !tracking.is_empty() {
            let violations = tracking.iter().filter(|&&r| !(r < TRACKING_TOL)).count();
            let worst = tracking.iter().copied().fold(0.0, f64::max);
            out.push(result(
                "tracking_identity",
                run,
                violations,
                worst,
                format!("relative conservation residual below {TRACKING_TOL:e}"),
            ));
        }

        let pairs: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| Some((r.error_vector_norm?, r.error_vector_bound?)))
            .collect();
        if !pairs.is_empty() {
            let violations = pairs.iter().filter(|(e, b)| *e > b * (1.0 + ERROR_BOUND_SLACK)).count();
            let worst = pairs
                .iter()
                .filter(|(_, b)| *b > 0.0)
                .map(|(e, b)| e / b)
                .fold(0.0, f64::max);
            out.push(result(
                "error_vector_bound",
                run,
                violations,
                worst,
                "||e^t|| <= kappa ||x^{t+1} - x^t||; worst is the largest ratio".into(),
            ));
        }

        let gnorm: Vec<f64> = rows.iter().filter_map(|r| r.gnorm_error).collect();
        if let Some(factor) = run.certificate.as_ref().and_then(|c| c.contraction_factor()) {
            if gnorm.len() >= 2 {
                let violations = gnorm
                    .windows(2)
                    .filter(|p| p[1] > factor * p[0] + CONTRACTION_SLACK)
                    .count();
                let worst = gnorm
                    .windows(2)
                    .filter(|p| p[0] > 1e-9)
                    .map(|p| p[1] / p[0])
                    .fold(0.0, f64::max);
                out.push(result(
                    "contraction",
                    run,
                    violations,
                    worst,
                    format!("G-norm error shrinks by at least {factor} per step; worst is the largest ratio"),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{preset, run_experiment};

    #[test]
    fn contraction_preset_passes_every_suite() {
        let record = run_experiment(&preset("contraction").unwrap()).unwrap();
        let names: Vec<&str> = record.checks.iter().map(|c| c.name.as_str()).collect();
        for expected in [
            "initial_error",
            "bounded",
            "tracking_identity",
            "error_vector_bound",
            "contraction",
        ] {
            assert!(names.contains(&expected), "{names:?}");
        }
        for check in &record.checks {
            assert!(check.passed, "{check:?}");
        }
    }

    #[test]
    fn corrupted_trace_is_reported() {
        let mut record = run_experiment(&preset("contraction").unwrap()).unwrap();
        let rows = &mut record.runs[0].trace.rows;
        rows[5].gnorm_error = Some(rows[4].gnorm_error.unwrap() * 2.0);
        rows[3].error_vector_norm = Some(rows[3].error_vector_bound.unwrap() * 2.0);
        let checks = check_record(&record);
        let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["error_vector_bound", "contraction"]);
    }
}
