//! Browser bindings. Every export takes plain numbers or a JSON string and
//! returns a JSON string; the `*_json` functions hold the logic so they can be
//! tested natively.

use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ntrack_core::analysis::{RateCertificate, DEFAULT_GRID};
use ntrack_core::harness::{preset, run_experiment, RunConfig};
use ntrack_core::topology::{build_topology, metropolis_weights, spectral_stats, TopologyKind};
use ntrack_core::{Error, Result};

#[derive(Serialize)]
struct Curve {
    label: String,
    iterations: Vec<usize>,
    comm_rounds: Vec<u64>,
    rel_errors: Vec<f64>,
    diverged: bool,
}

/// Graph, eigenvalues of `I - W` and the two extreme nonzero eigenvalues.
pub fn spectrum_json(kind: &str, n: usize, tau: f64, seed: u64) -> Result<Value> {
    let kind: TopologyKind = kind.parse()?;
    let graph = build_topology(kind, n, tau, seed)?;
    let stats = spectral_stats(&metropolis_weights(&graph))?;
    Ok(json!({
        "n": n,
        "edges": graph.edges(),
        "eigenvalues": stats.eigenvalues.as_slice(),
        "lambda_max": stats.lambda_max,
        "lambda_hat_min": stats.lambda_hat_min,
    }))
}

/// Relative-error curves of every method in a run configuration.
pub fn run_json(config: &str) -> Result<Value> {
    let config = RunConfig::from_json(config)?;
    let record = run_experiment(&config)?;
    let curves: Vec<Curve> = record
        .runs
        .iter()
        .map(|run| Curve {
            label: run.label.clone(),
            iterations: run.trace.rows.iter().map(|r| r.iter).collect(),
            comm_rounds: run.trace.rows.iter().map(|r| r.comm_rounds).collect(),
            rel_errors: run.trace.rel_errors(),
            diverged: run.trace.diverged,
        })
        .collect();
    Ok(json!({
        "lambda_max": record.spectra.lambda_max,
        "lambda_hat_min": record.spectra.lambda_hat_min,
        "mu_f": record.bounds.mu_f,
        "l_f": record.bounds.l_f,
        "curves": curves,
    }))
}

fn best_over_grid(mu: f64, l: f64, lambda_max: f64, lambda_hat_min: f64, alpha: f64, eps: f64) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for &beta in &DEFAULT_GRID {
        for &phi in &DEFAULT_GRID {
            let cert = RateCertificate::from_constants(mu, l, lambda_max, lambda_hat_min, alpha, eps, beta, phi)?;
            if let Some(d) = cert.delta_prime {
                best = Some(best.map_or(d, |b: f64| b.max(d)));
            }
        }
    }
    Ok(best)
}

fn log_axis(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "axis needs 0 < lo <= hi and at least two steps, got [{lo}, {hi}] with {steps}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..steps)
        .map(|k| (a + (b - a) * k as f64 / (steps - 1) as f64).exp())
        .collect())
}

/// Certified rate `δ'` over a log-spaced `(α, ε)` grid, maximized over
/// `(β, φ)`. Rows follow `ε`, columns follow `α`; infeasible cells are null.
pub fn certificate_map_json(
    mu: f64,
    l: f64,
    lambda_max: f64,
    lambda_hat_min: f64,
    alpha_range: (f64, f64),
    eps_range: (f64, f64),
    steps: usize,
) -> Result<Value> {
    let alphas = log_axis(alpha_range.0, alpha_range.1, steps)?;
    let epss = log_axis(eps_range.0, eps_range.1, steps)?;
    let mut rows = Vec::with_capacity(steps);
    for &eps in &epss {
        let row: Vec<Option<f64>> = alphas
            .iter()
            .map(|&alpha| best_over_grid(mu, l, lambda_max, lambda_hat_min, alpha, eps))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok(json!({ "alpha": alphas, "eps": epss, "delta_prime": rows }))
}

pub fn preset_json(name: &str) -> Result<String> {
    Ok(preset(name)?.to_json())
}

fn export(result: Result<Value>) -> std::result::Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn spectrum(kind: &str, n: usize, tau: f64, seed: u32) -> std::result::Result<String, JsError> {
    export(spectrum_json(kind, n, tau, u64::from(seed)))
}

#[wasm_bindgen]
pub fn run(config: &str) -> std::result::Result<String, JsError> {
    export(run_json(config))
}

#[wasm_bindgen(js_name = certificateMap)]
#[allow(clippy::too_many_arguments)]
pub fn certificate_map(
    mu: f64,
    l: f64,
    lambda_max: f64,
    lambda_hat_min: f64,
    alpha_lo: f64,
    alpha_hi: f64,
    eps_lo: f64,
    eps_hi: f64,
    steps: usize,
) -> std::result::Result<String, JsError> {
    export(certificate_map_json(
        mu,
        l,
        lambda_max,
        lambda_hat_min,
        (alpha_lo, alpha_hi),
        (eps_lo, eps_hi),
        steps,
    ))
}

#[wasm_bindgen(js_name = presetConfig)]
pub fn preset_config(name: &str) -> std::result::Result<String, JsError> {
    preset_json(name).map_err(|e| JsError::new(&e.to_string()))
}
