//! Rate certificate, G-norm, error vector and residual checks.
//!
//! The primal-dual pair is `ζ = (x, v)` with `G = blkdiag(Q, I/α)` and
//! `Q = εI - α(I-W)`. Every function here is pure.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    block_apply, disagreement, kron_apply, local_hessians, stacked_gradient, DecentralizedMethod, PrimalDual,
    StackedVector,
};
use crate::error::{ensure_positive, Error, Result};
use crate::objectives::{convexity_bounds, ObjectiveBounds, ObjectiveSet};
use crate::topology::{MixingMatrix, SpectralStats};

/// Relative slack on the error-vector bound.
pub const ERROR_BOUND_SLACK: f64 = 1e-10;
/// Absolute slack on each contraction step.
pub const CONTRACTION_SLACK: f64 = 1e-12;
/// Default `(β, φ)` grid for [`best_certificate`].
pub const DEFAULT_GRID: [f64; 7] = [1.25, 1.5, 2.0, 3.0, 5.0, 10.0, 50.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub mu_f: f64,
    pub l_f: f64,
    pub alpha: f64,
    pub eps: f64,
    /// `λ_max(I-W)`.
    pub lambda_max: f64,
    /// Smallest nonzero eigenvalue of `I-W`.
    pub lambda_hat_min: f64,
    pub beta: f64,
    pub phi: f64,
    /// `λ_min(Q) = ε - αλ_max(I-W)`.
    pub q_min: f64,
    /// `λ_max(Q) = ε`.
    pub q_max: f64,
    pub kappa: f64,
    /// `None` unless feasible.
    pub delta: Option<f64>,
    /// `None` unless feasible.
    pub delta_prime: Option<f64>,
    pub feasible: bool,
}

impl RateCertificate {
    #[allow(clippy::too_many_arguments)]
    pub fn from_constants(
        mu_f: f64,
        l_f: f64,
        lambda_max: f64,
        lambda_hat_min: f64,
        alpha: f64,
        eps: f64,
        beta: f64,
        phi: f64,
    ) -> Result<Self> {
        ensure_positive("mu_f", mu_f)?;
        ensure_positive("L_f", l_f)?;
        ensure_positive("lambda_max", lambda_max)?;
        ensure_positive("lambda_hat_min", lambda_hat_min)?;
        ensure_positive("alpha", alpha)?;
        ensure_positive("epsilon", eps)?;
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must exceed 1, got {beta}")));
        }
        if !(phi > 1.0 && phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi must exceed 1, got {phi}")));
        }
        if l_f < mu_f {
            return Err(Error::InvalidParameter(format!("L_f = {l_f} is below mu_f = {mu_f}")));
        }

        let q_min = eps - alpha * lambda_max;
        let q_max = eps;
        let kappa = 2.0 * l_f + alpha * lambda_max;
        let threshold = 4.0 * l_f * l_f / mu_f;
        let feasible = q_min > threshold;

        let (delta, delta_prime) = if feasible {
            let delta = 1.0 - threshold / q_min;
            let first = mu_f * delta / ((1.0 + delta) * (eps + beta * phi * l_f * l_f / (alpha * lambda_hat_min)));
            let second = alpha * delta * delta * q_min * lambda_hat_min
                / (beta * eps * eps / (beta - 1.0) + beta * phi * kappa * kappa / (phi - 1.0));
            (Some(delta), Some(first.min(second)))
        } else {
            (None, None)
        };

        Ok(RateCertificate {
            mu_f,
            l_f,
            alpha,
            eps,
            lambda_max,
            lambda_hat_min,
            beta,
            phi,
            q_min,
            q_max,
            kappa,
            delta,
            delta_prime,
            feasible,
        })
    }

    /// `4 L_f² / μ_f`, which `λ_min(Q)` must strictly exceed.
    pub fn threshold(&self) -> f64 {
        4.0 * self.l_f * self.l_f / self.mu_f
    }

    /// Guaranteed per-step factor `1 / (1 + δ')` on the squared G-norm error.
    pub fn contraction_factor(&self) -> Option<f64> {
        self.delta_prime.map(|d| 1.0 / (1.0 + d))
    }
}

pub fn rate_certificate(
    bounds: &ObjectiveBounds,
    spectra: &SpectralStats,
    alpha: f64,
    eps: f64,
    beta: f64,
    phi: f64,
) -> Result<RateCertificate> {
    let lambda_hat_min = spectra.spectral_gap()?;
    RateCertificate::from_constants(
        bounds.mu_f,
        bounds.l_f,
        spectra.lambda_max,
        lambda_hat_min,
        alpha,
        eps,
        beta,
        phi,
    )
}

/// Certificate with the largest `δ'` over `grid × grid`. Ties keep the first
/// pair in grid order. An infeasible problem returns the `(grid[0], grid[0])`
/// certificate.
pub fn best_certificate(
    bounds: &ObjectiveBounds,
    spectra: &SpectralStats,
    alpha: f64,
    eps: f64,
    grid: &[f64],
) -> Result<RateCertificate> {
    let mut best: Option<RateCertificate> = None;
    for &beta in grid {
        for &phi in grid {
            let cert = rate_certificate(bounds, spectra, alpha, eps, beta, phi)?;
            let better = match &best {
                None => true,
                Some(b) => cert.delta_prime.unwrap_or(f64::NEG_INFINITY) > b.delta_prime.unwrap_or(f64::NEG_INFINITY),
            };
            if better {
                best = Some(cert);
            }
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("empty (beta, phi) grid".into()))
}

/// `Q = εI - α(I-W)`.
pub fn q_matrix(mixing: &MixingMatrix, alpha: f64, eps: f64) -> DMatrix<f64> {
    let n = mixing.node_count();
    DMatrix::identity(n, n) * eps - mixing.laplacian() * alpha
}

/// The G-norm with `Q` validated once.
#[derive(Debug, Clone)]
pub struct GMetric {
    q: DMatrix<f64>,
    alpha: f64,
}

impl GMetric {
    pub fn new(q: DMatrix<f64>, alpha: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        if !q.is_square() {
            return Err(Error::InvalidParameter("Q must be square".into()));
        }
        if q.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter(
                "Q = eps I - alpha (I-W) is not positive definite".into(),
            ));
        }
        Ok(GMetric { q, alpha })
    }

    pub fn from_mixing(mixing: &MixingMatrix, alpha: f64, eps: f64) -> Result<Self> {
        Self::new(q_matrix(mixing, alpha, eps), alpha)
    }

    /// `||x - x*||²_Q + ||v - v*||² / α`.
    pub fn error(&self, x: &StackedVector, v: &StackedVector, x_star: &StackedVector, v_star: &StackedVector) -> f64 {
        let dx = x - x_star;
        let dv = v - v_star;
        dx.dot(&kron_apply(&self.q, &dx)) + dv.dot(&dv) / self.alpha
    }
}

pub fn g_norm_error(
    x: &StackedVector,
    v: &StackedVector,
    x_star: &StackedVector,
    v_star: &StackedVector,
    q: &DMatrix<f64>,
    alpha: f64,
) -> Result<f64> {
    Ok(GMetric::new(q.clone(), alpha)?.error(x, v, x_star, v_star))
}

/// Minimum-norm `v*` with `(I-W)^{1/2} v* = -∇f(1 ⊗ x*)`.
pub fn optimal_dual(objectives: &ObjectiveSet, spectra: &SpectralStats, x_star: &[f64]) -> StackedVector {
    let x = StackedVector::replicate(objectives.node_count(), x_star);
    kron_apply(&spectra.sqrt_laplacian_pinv(), &stacked_gradient(objectives, &x)).scaled(-1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// `||(I-W)^{1/2} x||`.
    pub primal: f64,
    /// `||∇f(x) + (I-W)^{1/2} v||`.
    pub dual: f64,
}

pub fn kkt_residual(
    x: &StackedVector,
    v: &StackedVector,
    objectives: &ObjectiveSet,
    spectra: &SpectralStats,
) -> KktResidual {
    let mut r = stacked_gradient(objectives, x);
    r += &kron_apply(&spectra.sqrt_laplacian, v);
    KktResidual {
        primal: kron_apply(&spectra.sqrt_laplacian, x).norm(),
        dual: r.norm(),
    }
}

/// `||(I-W)^{1/2} x||` from one sparse exchange, via
/// `xᵀ(I-W)x = Σ_{i<j} w_ij ||x_i - x_j||²`, which has no cancellation at
/// consensus.
pub fn consensus_residual(mixing: &MixingMatrix, x: &StackedVector) -> f64 {
    let mut total = 0.0;
    for i in 0..mixing.node_count() {
        let xi = x.block(i);
        for &(j, w) in mixing.row(i) {
            if j > i {
                let d2: f64 = xi.iter().zip(x.block(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                total += w * d2;
            }
        }
    }
    total.sqrt()
}

/// `e^t = ∇f(x^t) - ∇f(x^{t+1}) + ∇²f(x^t)(x^{t+1}-x^t) - α(I-W)(x^{t+1}-x^t)`.
pub fn error_vector(
    objectives: &ObjectiveSet,
    mixing: &MixingMatrix,
    alpha: f64,
    x: &StackedVector,
    x_next: &StackedVector,
) -> StackedVector {
    let step = x_next - x;
    let mut e = stacked_gradient(objectives, x);
    e -= &stacked_gradient(objectives, x_next);
    e += &block_apply(&local_hessians(objectives, x), &step);
    e -= &disagreement(mixing, &step).scaled(alpha);
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub kappa: f64,
    pub steps: usize,
    pub violations: usize,
    /// Largest `||e^t|| / (κ ||x^{t+1} - x^t||)` over steps that moved.
    pub worst_ratio: f64,
    pub error_norms: Vec<f64>,
    pub bounds: Vec<f64>,
}

impl ErrorBoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `||e^t|| <= κ ||x^{t+1} - x^t||` along consecutive iterates, with
/// `κ = 2L_f + αλ_max(I-W)`.
pub fn error_bound_check<M: DecentralizedMethod>(
    trajectory: &[M],
    objectives: &ObjectiveSet,
    mixing: &MixingMatrix,
    alpha: f64,
) -> Result<ErrorBoundReport> {
    ensure_positive("alpha", alpha)?;
    let bounds = convexity_bounds(objectives)?;
    let lambda_max = mixing.eigenvalues().max();
    let kappa = 2.0 * bounds.l_f + alpha * lambda_max;
    let mut report = ErrorBoundReport {
        kappa,
        steps: 0,
        violations: 0,
        worst_ratio: 0.0,
        error_norms: Vec::new(),
        bounds: Vec::new(),
    };
    for pair in trajectory.windows(2) {
        let (x, x_next) = (pair[0].iterate(), pair[1].iterate());
        let e = error_vector(objectives, mixing, alpha, x, x_next).norm();
        let bound = kappa * x_next.distance(x);
        if e > bound * (1.0 + ERROR_BOUND_SLACK) {
            report.violations += 1;
        }
        if bound > 0.0 {
            report.worst_ratio = report.worst_ratio.max(e / bound);
        }
        report.steps += 1;
        report.error_norms.push(e);
        report.bounds.push(bound);
    }
    Ok(report)
}

/// Norm of the optimality-gap identity
/// `∇f(x^{t+1}) - ∇f(x*) + (I-W)^{1/2}(v^{t+1} - v*) + ε(x^{t+1} - x^t) + e^t`
/// for every step of a primal-dual trajectory. Zero up to rounding.
pub fn stationarity_residuals(
    trajectory: &[PrimalDual],
    objectives: &ObjectiveSet,
    mixing: &MixingMatrix,
    spectra: &SpectralStats,
    x_star: &[f64],
    v_star: &StackedVector,
) -> Vec<f64> {
    let x_opt = StackedVector::replicate(objectives.node_count(), x_star);
    let g_opt = stacked_gradient(objectives, &x_opt);
    trajectory
        .windows(2)
        .map(|pair| {
            let (cur, next) = (&pair[0], &pair[1]);
            let mut r = stacked_gradient(objectives, next.iterate());
            r -= &g_opt;
            r += &kron_apply(&spectra.sqrt_laplacian, &(next.dual() - v_star));
            r += &(next.iterate() - cur.iterate()).scaled(cur.eps());
            r += &error_vector(objectives, mixing, cur.alpha(), cur.iterate(), next.iterate());
            r.norm()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Certified factor `1 / (1 + δ')`.
    pub factor: f64,
    pub steps: usize,
    pub violations: usize,
    /// Largest `E^{t+1} / E^t` over steps with `E^t > 1e-9`.
    pub worst_ratio: f64,
    /// `||ζ^t - ζ*||²_G` for every iterate.
    pub errors: Vec<f64>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `E^{t+1} <= E^t / (1 + δ') + 1e-12` with `E^t = ||ζ^t - ζ*||²_G`
/// along a primal-dual trajectory.
pub fn contraction_check(
    trajectory: &[PrimalDual],
    cert: &RateCertificate,
    mixing: &MixingMatrix,
    x_star: &[f64],
    v_star: &StackedVector,
) -> Result<ContractionReport> {
    let factor = cert.contraction_factor().ok_or(Error::Infeasible {
        q_min: cert.q_min,
        threshold: cert.threshold(),
    })?;
    let metric = GMetric::from_mixing(mixing, cert.alpha, cert.eps)?;
    if let Some(first) = trajectory.first() {
        if first.alpha() != cert.alpha || first.eps() != cert.eps {
            return Err(Error::InvalidParameter(format!(
                "trajectory uses (alpha, eps) = ({}, {}), certificate ({}, {})",
                first.alpha(),
                first.eps(),
                cert.alpha,
                cert.eps
            )));
        }
    }
    let x_opt = StackedVector::replicate(mixing.node_count(), x_star);
    let errors: Vec<f64> = trajectory
        .iter()
        .map(|s| metric.error(s.iterate(), s.dual(), &x_opt, v_star))
        .collect();
    let mut report = ContractionReport {
        factor,
        steps: 0,
        violations: 0,
        worst_ratio: 0.0,
        errors: Vec::new(),
    };
    for pair in errors.windows(2) {
        if pair[1] > factor * pair[0] + CONTRACTION_SLACK {
            report.violations += 1;
        }
        if pair[0] > 1e-9 {
            report.worst_ratio = report.worst_ratio.max(pair[1] / pair[0]);
        }
        report.steps += 1;
    }
    report.errors = errors;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub comm_rounds: u64,
    pub scalars_sent: u64,
    pub rel_error: f64,
    pub gnorm_error: Option<f64>,
    pub tracking_residual: Option<f64>,
    pub kkt_primal: f64,
    pub kkt_dual: f64,
    /// `||e^t||`, known once `x^{t+1}` is.
    pub error_vector_norm: Option<f64>,
    /// `κ ||x^{t+1} - x^t||`.
    pub error_vector_bound: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub method: String,
    pub rows: Vec<TraceRow>,
    /// Set when the run was cut short by a non-finite or exploding error.
    #[serde(default)]
    pub diverged: bool,
}

impl ConvergenceTrace {
    pub fn new(method: impl Into<String>) -> Self {
        ConvergenceTrace {
            method: method.into(),
            rows: Vec::new(),
            diverged: false,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rel_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rel_error).collect()
    }

    /// First iteration whose relative error is at most `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.rel_error <= threshold).map(|r| r.iter)
    }

    pub fn final_error(&self) -> Option<f64> {
        self.rows.last().map(|r| r.rel_error)
    }

    /// Fit over [`decaying_window`] with the default band.
    pub fn fit_rate(&self) -> Result<LinearFit> {
        let errors = self.rel_errors();
        let window = decaying_window(&errors, WINDOW_UPPER, WINDOW_LOWER)
            .ok_or_else(|| Error::RateFit("trace never enters the decaying band".into()))?;
        fit_linear_rate(&errors, window)
    }
}

/// Upper edge of the default decaying band.
pub const WINDOW_UPPER: f64 = 1e-1;
/// Lower edge of the default decaying band, above the rounding floor.
pub const WINDOW_LOWER: f64 = 1e-10;

/// Indices from the first error at or below `upper` through the first error
/// at or below `lower` (or the end of the sequence). `None` when fewer than two
/// points fall in the band.
pub fn decaying_window(errors: &[f64], upper: f64, lower: f64) -> Option<Range<usize>> {
    let start = errors.iter().position(|&e| e <= upper)?;
    let end = errors[start..]
        .iter()
        .position(|&e| e <= lower)
        .map_or(errors.len(), |k| start + k + 1);
    (end - start >= 2).then_some(start..end)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Decades per iteration.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(t, log10 errors[t])` for `t` in `window`.
pub fn fit_linear_rate(errors: &[f64], window: Range<usize>) -> Result<LinearFit> {
    if window.end > errors.len() || window.len() < 2 {
        return Err(Error::RateFit(format!(
            "window {window:?} needs two points inside a sequence of length {}",
            errors.len()
        )));
    }
    let mut ts = Vec::with_capacity(window.len());
    let mut ys = Vec::with_capacity(window.len());
    for t in window {
        let e = errors[t];
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::RateFit(format!("error {e} at iteration {t} is not positive")));
        }
        ts.push(t as f64);
        ys.push(e.log10());
    }
    let k = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for (t, y) in ts.iter().zip(&ys) {
        stt += (t - t_mean) * (t - t_mean);
        sty += (t - t_mean) * (y - y_mean);
        syy += (y - y_mean) * (y - y_mean);
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    // a flat line up to rounding of the logs fits perfectly
    let flat = syy <= k * (f64::EPSILON * y_mean.abs().max(1.0)).powi(2);
    let r_squared = if flat { 1.0 } else { sty * sty / (stt * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Dense `G`-weighted quadratic form, for cross-checking [`GMetric`].
#[doc(hidden)]
pub fn dense_g_form(q: &DMatrix<f64>, alpha: f64, p: usize, dx: &[f64], dv: &[f64]) -> f64 {
    let n = q.nrows();
    let big = q.kronecker(&DMatrix::<f64>::identity(p, p));
    let mut g = DMatrix::<f64>::zeros(2 * n * p, 2 * n * p);
    g.view_mut((0, 0), (n * p, n * p)).copy_from(&big);
    for k in 0..n * p {
        g[(n * p + k, n * p + k)] = 1.0 / alpha;
    }
    let z = DVector::from_iterator(2 * n * p, dx.iter().chain(dv).copied());
    z.dot(&(&g * &z))
}
