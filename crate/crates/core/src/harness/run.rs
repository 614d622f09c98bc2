use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checks::{check_record, CheckResult};
use super::config::{AlgorithmSpec, ProblemSpec, RunConfig, SweepEntry};
use crate::algorithms::{
    centralized_reference, CommCost, DecentralizedMethod, Dlm, Extra, GradientTracking, NewtonTracking, PrimalDual,
    StackedVector,
};
use crate::analysis::{
    best_certificate, consensus_residual, error_vector, rate_certificate, ConvergenceTrace, GMetric, RateCertificate,
    TraceRow, DEFAULT_GRID,
};
use crate::error::{Error, Result};
use crate::objectives::{
    convexity_bounds, generate_logistic_data, generate_quadratic_terms, ObjectiveBounds, ObjectiveSet,
};
use crate::topology::{build_topology, metropolis_weights, spectral_stats, Graph, MixingMatrix, SpectralStats};

/// A trace stops once its relative error exceeds this or turns non-finite.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Everything a run needs before any method starts.
#[derive(Debug)]
pub struct Problem {
    pub graph: Graph,
    pub mixing: MixingMatrix,
    pub spectra: SpectralStats,
    pub objectives: ObjectiveSet,
    pub bounds: ObjectiveBounds,
    pub digest: String,
    pub x_star: Vec<f64>,
    pub reference_residual: f64,
    pub reference_iterations: usize,
}

pub fn build_problem(config: &RunConfig) -> Result<Problem> {
    let t = &config.topology;
    let graph = build_topology(t.kind, t.n, t.tau, t.seed).map_err(|e| e.context("topology"))?;
    let mixing = metropolis_weights(&graph);
    let spectra = spectral_stats(&mixing).map_err(|e| e.context("topology"))?;

    let (objectives, digest) = match &config.problem {
        ProblemSpec::Logistic { m, p, rho, seed } => {
            let data = generate_logistic_data(t.n, *m, *p, *rho, *seed).map_err(|e| e.context("problem"))?;
            (ObjectiveSet::logistic(&data), data.digest())
        }
        ProblemSpec::Quadratic { p, seed, curvature } => {
            let terms = generate_quadratic_terms(t.n, *p, (curvature[0], curvature[1]), *seed)
                .map_err(|e| e.context("problem"))?;
            let digest = quadratic_digest(&terms);
            (ObjectiveSet::quadratic(terms), digest)
        }
    };
    let objectives = objectives.map_err(|e| e.context("problem"))?;
    let bounds = convexity_bounds(&objectives).map_err(|e| e.context("problem"))?;
    let reference = centralized_reference(&objectives, config.reference_tol).map_err(|e| e.context("reference_tol"))?;
    Ok(Problem {
        graph,
        mixing,
        spectra,
        objectives,
        bounds,
        digest,
        x_star: reference.x.as_slice().to_vec(),
        reference_residual: reference.gradient_norm,
        reference_iterations: reference.iterations,
    })
}

fn quadratic_digest(terms: &[(DMatrix<f64>, nalgebra::DVector<f64>)]) -> String {
    let mut hasher = Sha256::new();
    for (a, b) in terms {
        for v in a.iter().chain(b.iter()) {
            hasher.update(v.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraSummary {
    pub lambda_max: f64,
    pub lambda_hat_min: Option<f64>,
    /// Ascending eigenvalues of `I - W`.
    pub eigenvalues: Vec<f64>,
    pub edges: usize,
}

impl SpectraSummary {
    pub fn new(graph: &Graph, spectra: &SpectralStats) -> Self {
        SpectraSummary {
            lambda_max: spectra.lambda_max,
            lambda_hat_min: spectra.lambda_hat_min,
            eigenvalues: spectra.eigenvalues.iter().copied().collect(),
            edges: graph.edge_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRun {
    /// Unique within the record; also the CSV file stem.
    pub label: String,
    pub spec: AlgorithmSpec,
    pub certificate: Option<RateCertificate>,
    pub trace: ConvergenceTrace,
    pub total_cost: CommCost,
    pub mean_wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub dataset_digest: String,
    pub x_star: Vec<f64>,
    pub reference_residual: f64,
    pub reference_iterations: usize,
    pub spectra: SpectraSummary,
    pub bounds: ObjectiveBounds,
    pub runs: Vec<AlgorithmRun>,
    #[serde(default)]
    pub checks: Vec<CheckResult>,
}

impl RunRecord {
    pub fn run(&self, label: &str) -> Option<&AlgorithmRun> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Per-run inputs shared by every traced method.
struct TraceContext<'a> {
    problem: &'a Problem,
    x_opt: StackedVector,
    base: f64,
    iterations: usize,
    stop_below: Option<f64>,
    timing: bool,
    /// G-norm metric and `(I-W)^{1/2}` pseudo-inverse, with `v*`.
    gnorm: Option<(GMetric, DMatrix<f64>, StackedVector)>,
    /// `(α, κ)` for the error-vector columns.
    error_bound: Option<(f64, f64)>,
}

fn trace_method<M: DecentralizedMethod>(
    start: M,
    ctx: &TraceContext,
) -> Result<(ConvergenceTrace, CommCost, Option<f64>)> {
    let problem = ctx.problem;
    let per_step = CommCost::per_step(&start, &problem.mixing);
    let mut trace = ConvergenceTrace::new(start.name());
    let mut cost = CommCost::default();
    let mut state = start;
    let mut elapsed_ms = 0.0;
    loop {
        let t = state.iteration();
        let x = state.iterate();
        let rel_error = x.distance(&ctx.x_opt) / ctx.base;
        let gnorm_error = match (&ctx.gnorm, state.dual_image()) {
            (Some((metric, pinv, v_star)), Some(image)) => {
                let v = crate::algorithms::kron_apply(pinv, &image);
                Some(metric.error(x, &v, &ctx.x_opt, v_star))
            }
            _ => None,
        };
        let row = TraceRow {
            iter: t,
            comm_rounds: cost.rounds,
            scalars_sent: cost.scalars,
            rel_error,
            gnorm_error,
            tracking_residual: state.tracking_residual(),
            kkt_primal: consensus_residual(&problem.mixing, x),
            kkt_dual: state.dual_residual(&problem.objectives),
            error_vector_norm: None,
            error_vector_bound: None,
            wall_ms: None,
        };
        // non-finite rows are dropped so records stay valid JSON
        let finite = rel_error.is_finite()
            && row.kkt_primal.is_finite()
            && row.kkt_dual.is_finite()
            && row.gnorm_error.is_none_or(f64::is_finite)
            && row.tracking_residual.is_none_or(f64::is_finite);
        if finite {
            trace.rows.push(row);
        }
        if !finite || rel_error > DIVERGENCE_LIMIT {
            trace.diverged = true;
            break;
        }
        if t >= ctx.iterations || ctx.stop_below.is_some_and(|s| rel_error <= s) {
            break;
        }

        let clock = Clock::start(ctx.timing);
        let next = match state.step(&problem.objectives, &problem.mixing) {
            Ok(next) => next,
            Err(Error::NotPositiveDefinite { .. }) => {
                // only reachable once the iterate has blown up
                trace.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let step_ms = clock.stop();
        cost = cost.plus(per_step);

        let row = trace.rows.last_mut().expect("row pushed above");
        if let Some(ms) = step_ms {
            row.wall_ms = Some(ms);
            elapsed_ms += ms;
        }
        if let Some((alpha, kappa)) = ctx.error_bound {
            let e = error_vector(
                &problem.objectives,
                &problem.mixing,
                alpha,
                state.iterate(),
                next.iterate(),
            )
            .norm();
            let bound = kappa * next.iterate().distance(state.iterate());
            if e.is_finite() && bound.is_finite() {
                row.error_vector_norm = Some(e);
                row.error_vector_bound = Some(bound);
            }
        }
        state = next;
    }
    let steps = trace.rows.len().saturating_sub(1);
    let mean = (ctx.timing && steps > 0).then(|| elapsed_ms / steps as f64);
    Ok((trace, cost, mean))
}

/// Wall clock; `std::time::Instant` is unavailable on wasm32.
struct Clock(#[cfg(not(target_arch = "wasm32"))] Option<std::time::Instant>);

impl Clock {
    #[cfg(not(target_arch = "wasm32"))]
    fn start(enabled: bool) -> Self {
        Clock(enabled.then(std::time::Instant::now))
    }

    #[cfg(target_arch = "wasm32")]
    fn start(_enabled: bool) -> Self {
        Clock()
    }

    #[cfg(not(target_arch = "wasm32"))]
    fn stop(self) -> Option<f64> {
        self.0.map(|t| t.elapsed().as_secs_f64() * 1e3)
    }

    #[cfg(target_arch = "wasm32")]
    fn stop(self) -> Option<f64> {
        None
    }
}

fn certificate_for(config: &RunConfig, problem: &Problem, alpha: f64, eps: f64) -> Result<Option<RateCertificate>> {
    if !config.analysis.certificate || problem.spectra.lambda_hat_min.is_none() {
        return Ok(None);
    }
    let cert = if config.analysis.grid {
        best_certificate(&problem.bounds, &problem.spectra, alpha, eps, &DEFAULT_GRID)?
    } else {
        rate_certificate(
            &problem.bounds,
            &problem.spectra,
            alpha,
            eps,
            config.analysis.beta,
            config.analysis.phi,
        )?
    };
    Ok(Some(cert))
}

/// Runs one selected method on a prepared problem.
pub fn run_algorithm(config: &RunConfig, problem: &Problem, spec: &AlgorithmSpec) -> Result<AlgorithmRun> {
    let n = problem.objectives.node_count();
    let x_opt = StackedVector::replicate(n, &problem.x_star);
    let norm = x_opt.norm();
    let certificate = match spec.certified_pair() {
        Some((alpha, eps)) => certificate_for(config, problem, alpha, eps)?,
        None => None,
    };
    let gnorm = match &certificate {
        Some(cert) if cert.feasible => {
            let metric = GMetric::from_mixing(&problem.mixing, cert.alpha, cert.eps)?;
            let v_star = crate::analysis::optimal_dual(&problem.objectives, &problem.spectra, &problem.x_star);
            Some((metric, problem.spectra.sqrt_laplacian_pinv(), v_star))
        }
        _ => None,
    };
    let error_bound = match spec.certified_pair() {
        Some((alpha, _)) if config.analysis.checks => {
            Some((alpha, 2.0 * problem.bounds.l_f + alpha * problem.spectra.lambda_max))
        }
        _ => None,
    };
    let ctx = TraceContext {
        problem,
        // x^0 = 0, so the denominator is ||1 ⊗ x*||; an optimum at the
        // origin falls back to the absolute error
        base: if norm > 0.0 { norm } else { 1.0 },
        x_opt,
        iterations: config.iterations,
        stop_below: config.stop_below,
        timing: config.timing,
        gnorm,
        error_bound,
    };
    let f = &problem.objectives;
    let w = &problem.mixing;
    let (trace, total_cost, mean_wall_ms) = match *spec {
        AlgorithmSpec::NewtonTracking { alpha, eps } => trace_method(NewtonTracking::init(f, w, alpha, eps)?, &ctx)?,
        AlgorithmSpec::PrimalDual { alpha, eps } => {
            trace_method(PrimalDual::init(f, &problem.spectra, alpha, eps)?, &ctx)?
        }
        AlgorithmSpec::GradientTracking { alpha } => trace_method(GradientTracking::init(f, w, alpha)?, &ctx)?,
        AlgorithmSpec::Extra { alpha } => trace_method(Extra::init(f, w, alpha)?, &ctx)?,
        AlgorithmSpec::Dlm { alpha, eps } => trace_method(Dlm::init(f, &problem.graph, alpha, eps)?, &ctx)?,
    };
    Ok(AlgorithmRun {
        label: spec.name().to_string(),
        spec: *spec,
        certificate,
        trace,
        total_cost,
        mean_wall_ms,
    })
}

/// Topology, weights, data, reference optimum, then every selected method
/// from `x^0 = 0` for the iteration budget.
pub fn run_experiment(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let problem = build_problem(config)?;
    let mut runs: Vec<AlgorithmRun> = Vec::with_capacity(config.algorithms.len());
    for (k, spec) in config.algorithms.iter().enumerate() {
        let mut run = run_algorithm(config, &problem, spec).map_err(|e| e.context(format!("algorithms[{k}]")))?;
        let clashes = runs.iter().filter(|r| r.spec.name() == spec.name()).count();
        if clashes > 0 {
            run.label = format!("{}-{}", spec.name(), clashes + 1);
        }
        runs.push(run);
    }
    let mut record = RunRecord {
        config: config.clone(),
        dataset_digest: problem.digest.clone(),
        x_star: problem.x_star.clone(),
        reference_residual: problem.reference_residual,
        reference_iterations: problem.reference_iterations,
        spectra: SpectraSummary::new(&problem.graph, &problem.spectra),
        bounds: problem.bounds,
        runs,
        checks: Vec::new(),
    };
    if config.analysis.checks {
        record.checks = check_record(&record);
    }
    Ok(record)
}

/// One run per entry with everything but the topology shared. Runs execute
/// in parallel where threads exist; the output order follows `entries`.
pub fn topology_sweep(config: &RunConfig, entries: &[SweepEntry]) -> Result<Vec<RunRecord>> {
    let configs: Vec<RunConfig> = entries.iter().map(|&e| config.with_topology(e)).collect();
    let results = run_all(&configs);
    results
        .into_iter()
        .zip(entries)
        .map(|(r, e)| r.map_err(|err| err.context(format!("sweep {}", e.label()))))
        .collect()
}

#[cfg(not(target_arch = "wasm32"))]
fn run_all(configs: &[RunConfig]) -> Vec<Result<RunRecord>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || run_experiment(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

#[cfg(target_arch = "wasm32")]
fn run_all(configs: &[RunConfig]) -> Vec<Result<RunRecord>> {
    configs.iter().map(run_experiment).collect()
}
