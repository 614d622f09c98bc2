//! Local objectives `f_i`, synthetic logistic-regression data, and global
//! curvature bounds.

use std::fmt;

use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_positive, Error, Result};

/// A twice differentiable local objective over `R^p`.
pub trait LocalObjective: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> DVector<f64>;
    fn hess(&self, x: &[f64]) -> DMatrix<f64>;

    /// `(mu_i, L_i)` with `mu_i I <= hess(x) <= L_i I` everywhere, when known
    /// analytically.
    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        None
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

/// Regularized logistic loss held by one node:
/// `reg/2 ||x||^2 + sum_j ln(1 + exp(-p_j o_j^T x))`.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    /// One sample per row.
    features: DMatrix<f64>,
    labels: Vec<f64>,
    reg: f64,
    upper: f64,
}

impl LogisticObjective {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>, reg: f64) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
        }
        if !(reg >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularizer must be nonnegative, got {reg}"
            )));
        }
        let gram = features.transpose() * &features;
        let upper = reg + 0.25 * extreme_eigenvalues(&gram).1.max(0.0);
        Ok(LogisticObjective {
            features,
            labels,
            reg,
            upper,
        })
    }

    fn margins(&self, x: &[f64]) -> DVector<f64> {
        &self.features * DVectorView::from_slice(x, x.len())
    }
}

impl LocalObjective for LogisticObjective {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let margins = self.margins(x);
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let loss: f64 = margins
            .iter()
            .zip(&self.labels)
            .map(|(&z, &label)| softplus(-label * z))
            .sum();
        0.5 * self.reg * norm2 + loss
    }

    fn grad(&self, x: &[f64]) -> DVector<f64> {
        let margins = self.margins(x);
        let weights = DVector::from_iterator(
            self.labels.len(),
            margins
                .iter()
                .zip(&self.labels)
                .map(|(&z, &label)| -label * sigmoid(-label * z)),
        );
        self.features.tr_mul(&weights) + DVector::from_column_slice(x) * self.reg
    }

    fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        let p = self.dim();
        let margins = self.margins(x);
        let mut h = DMatrix::zeros(p, p);
        for (k, &z) in margins.iter().enumerate() {
            let s = sigmoid(z);
            let c = s * (1.0 - s);
            let o = self.features.row(k);
            for a in 0..p {
                let ca = c * o[a];
                for b in a..p {
                    h[(a, b)] += ca * o[b];
                }
            }
        }
        for a in 0..p {
            h[(a, a)] += self.reg;
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h
    }

    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        Some((self.reg, self.upper))
    }
}

/// `f(x) = 1/2 x^T A x + b^T x` with `A` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
    bounds: (f64, f64),
}

impl QuadraticObjective {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let p = a.nrows();
        if a.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: a.ncols(),
            });
        }
        if b.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: b.len(),
            });
        }
        let scale = a.amax().max(1.0);
        if (&a - a.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotSymmetric);
        }
        let bounds = extreme_eigenvalues(&a);
        if !(bounds.0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic term must be positive definite, smallest eigenvalue {}",
                bounds.0
            )));
        }
        Ok(QuadraticObjective { a, b, bounds })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }
}

impl LocalObjective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let x = DVectorView::from_slice(x, x.len());
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(&x)
    }

    fn grad(&self, x: &[f64]) -> DVector<f64> {
        &self.a * DVectorView::from_slice(x, x.len()) + &self.b
    }

    fn hess(&self, _x: &[f64]) -> DMatrix<f64> {
        self.a.clone()
    }

    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        Some(self.bounds)
    }
}

/// The `n` local objectives of a network, all over the same dimension.
#[derive(Debug)]
pub struct ObjectiveSet {
    locals: Vec<Box<dyn LocalObjective>>,
    dim: usize,
}

impl ObjectiveSet {
    pub fn new(locals: Vec<Box<dyn LocalObjective>>) -> Result<Self> {
        let dim = locals
            .first()
            .map(|f| f.dim())
            .ok_or_else(|| Error::InvalidParameter("need at least one local objective".into()))?;
        if let Some(bad) = locals.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(ObjectiveSet { locals, dim })
    }

    pub fn logistic(dataset: &LogisticDataset) -> Result<Self> {
        let locals = (0..dataset.n)
            .map(|i| make_logistic(dataset, i).map(|f| Box::new(f) as Box<dyn LocalObjective>))
            .collect::<Result<_>>()?;
        Self::new(locals)
    }

    pub fn quadratic(terms: Vec<(DMatrix<f64>, DVector<f64>)>) -> Result<Self> {
        let locals = terms
            .into_iter()
            .map(|(a, b)| make_quadratic(a, b).map(|f| Box::new(f) as Box<dyn LocalObjective>))
            .collect::<Result<_>>()?;
        Self::new(locals)
    }

    pub fn node_count(&self) -> usize {
        self.locals.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local(&self, i: usize) -> &dyn LocalObjective {
        self.locals[i].as_ref()
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn LocalObjective> {
        self.locals.iter().map(|f| f.as_ref())
    }

    /// `sum_i f_i(x)` at a common point.
    pub fn total(&self, x: &[f64]) -> f64 {
        self.iter().map(|f| f.eval(x)).sum()
    }

    pub fn total_grad(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for f in self.iter() {
            g += f.grad(x);
        }
        g
    }

    pub fn total_hess(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for f in self.iter() {
            h += f.hess(x);
        }
        h
    }
}

/// Node `i`'s share of the regularized logistic problem. The global
/// regularizer `rho/2 ||x||^2` is split evenly across the `n` nodes.
pub fn make_logistic(dataset: &LogisticDataset, node: usize) -> Result<LogisticObjective> {
    if node >= dataset.n {
        return Err(Error::InvalidParameter(format!(
            "node {node} out of range for {} nodes",
            dataset.n
        )));
    }
    let samples = &dataset.features[node];
    let features = DMatrix::from_fn(samples.len(), dataset.p, |r, c| samples[r][c]);
    let labels = dataset.labels[node].iter().map(|&l| f64::from(l)).collect();
    LogisticObjective::new(features, labels, dataset.rho / dataset.n as f64)
}

pub fn make_quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Result<QuadraticObjective> {
    QuadraticObjective::new(a, b)
}

/// Per-node logistic-regression samples. Serializes to
/// `{"n", "m", "p", "rho", "seed", "features", "labels"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticDataset {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub rho: f64,
    pub seed: u64,
    /// `features[i][j]` is sample `j` of node `i`.
    pub features: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<Vec<i8>>,
}

impl LogisticDataset {
    /// Checks shapes and label values of a deserialized dataset.
    pub fn validate(&self) -> Result<()> {
        ensure_positive("rho", self.rho)?;
        if self.features.len() != self.n || self.labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: self.features.len().min(self.labels.len()),
            });
        }
        for (samples, labels) in self.features.iter().zip(&self.labels) {
            if samples.len() != labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: samples.len(),
                    found: labels.len(),
                });
            }
            if let Some(row) = samples.iter().find(|row| row.len() != self.p) {
                return Err(Error::DimensionMismatch {
                    expected: self.p,
                    found: row.len(),
                });
            }
            if labels.iter().any(|&l| l != 1 && l != -1) {
                return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
            }
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.labels.iter().map(Vec::len).sum()
    }

    /// SHA-256 over the raw feature bits and labels, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for v in [self.n as u64, self.m as u64, self.p as u64] {
            hasher.update(v.to_le_bytes());
        }
        hasher.update(self.rho.to_le_bytes());
        for (samples, labels) in self.features.iter().zip(&self.labels) {
            for (row, &label) in samples.iter().zip(labels) {
                for v in row {
                    hasher.update(v.to_le_bytes());
                }
                hasher.update([label as u8]);
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Standard-normal features and labels uniform over `{-1, +1}`, drawn node by
/// node, sample by sample, from a seeded ChaCha stream.
pub fn generate_logistic_data(n: usize, m: usize, p: usize, rho: f64, seed: u64) -> Result<LogisticDataset> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidParameter("dataset sizes must be positive".into()));
    }
    ensure_positive("rho", rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut node_features = Vec::with_capacity(m);
        let mut node_labels = Vec::with_capacity(m);
        for _ in 0..m {
            node_features.push((0..p).map(|_| rng.sample(StandardNormal)).collect());
            node_labels.push(if rng.random_bool(0.5) { 1 } else { -1 });
        }
        features.push(node_features);
        labels.push(node_labels);
    }
    Ok(LogisticDataset {
        n,
        m,
        p,
        rho,
        seed,
        features,
        labels,
    })
}

/// Random quadratic terms `(A_i, b_i)`: `A_i = U diag(s) U^T` with `U`
/// orthogonal and the spectrum `s` uniform in `[lo, hi]`, `b_i` standard
/// normal. When `lo == hi` the matrices are exactly `lo * I`.
pub fn generate_quadratic_terms(
    n: usize,
    p: usize,
    curvature: (f64, f64),
    seed: u64,
) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
    let (lo, hi) = curvature;
    ensure_positive("curvature lower bound", lo)?;
    if !(hi >= lo) || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid curvature range [{lo}, {hi}]")));
    }
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("sizes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::with_capacity(n);
    for _ in 0..n {
        let a = if lo == hi {
            DMatrix::identity(p, p) * lo
        } else {
            let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let u = g.qr().q();
            let spectrum = DVector::from_fn(p, |_, _| rng.random_range(lo..=hi));
            let a = &u * DMatrix::from_diagonal(&spectrum) * u.transpose();
            (&a + a.transpose()) * 0.5
        };
        let b = DVector::from_fn(p, |_, _| rng.sample(StandardNormal));
        terms.push((a, b));
    }
    Ok(terms)
}

/// Global strong convexity and smoothness constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBounds {
    pub mu_f: f64,
    pub l_f: f64,
}

/// `mu_f = min_i mu_i`, `L_f = max_i L_i` over the nodes' analytic bounds.
pub fn convexity_bounds(objectives: &ObjectiveSet) -> Result<ObjectiveBounds> {
    let mut mu_f = f64::INFINITY;
    let mut l_f = 0.0f64;
    for (node, f) in objectives.iter().enumerate() {
        let (mu, l) = f.curvature_bounds().ok_or(Error::UnknownBounds { node })?;
        mu_f = mu_f.min(mu);
        l_f = l_f.max(l);
    }
    if !(mu_f > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "objectives are not strongly convex (mu_f = {mu_f})"
        )));
    }
    Ok(ObjectiveBounds { mu_f, l_f })
}

pub const GRADIENT_TOL: f64 = 1e-5;
pub const HESSIAN_TOL: f64 = 1e-4;

/// Finite-difference comparison of an objective's derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeReport {
    /// `||g_fd - grad|| / max(||grad||, 1)`.
    pub gradient_error: f64,
    /// Worst `||(grad(x+hv) - grad(x-hv))/2h - hess v|| / max(||hess v||, 1)`
    /// over coordinate directions `v`.
    pub hessian_error: f64,
    pub gradient_ok: bool,
    pub hessian_ok: bool,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.gradient_ok && self.hessian_ok
    }
}

/// Central-difference check of `grad` against `eval` and of `hess` against
/// `grad`. Violations are reported, not raised.
pub fn derivative_check(obj: &dyn LocalObjective, x: &[f64], h: f64) -> Result<DerivativeReport> {
    if !(1e-7..=1e-4).contains(&h) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must lie in [1e-7, 1e-4], got {h}"
        )));
    }
    let p = obj.dim();
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: x.len(),
        });
    }
    let grad = obj.grad(x);
    let hess = obj.hess(x);
    let mut fd = DVector::zeros(p);
    let mut hessian_error = 0.0f64;
    let mut probe = x.to_vec();
    for k in 0..p {
        probe[k] = x[k] + h;
        let (f_plus, g_plus) = (obj.eval(&probe), obj.grad(&probe));
        probe[k] = x[k] - h;
        let (f_minus, g_minus) = (obj.eval(&probe), obj.grad(&probe));
        probe[k] = x[k];
        fd[k] = (f_plus - f_minus) / (2.0 * h);
        let hv_fd = (g_plus - g_minus) / (2.0 * h);
        let hv = hess.column(k);
        hessian_error = hessian_error.max((&hv_fd - hv).norm() / hv.norm().max(1.0));
    }
    let gradient_error = (&fd - &grad).norm() / grad.norm().max(1.0);
    Ok(DerivativeReport {
        gradient_error,
        hessian_error,
        gradient_ok: gradient_error < GRADIENT_TOL,
        hessian_ok: hessian_error < HESSIAN_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> LogisticDataset {
        generate_logistic_data(10, 12, 8, 0.001, 42).unwrap()
    }

    #[test]
    fn logistic_at_origin() {
        let data = preset();
        let f = make_logistic(&data, 3).unwrap();
        let x = vec![0.0; 8];
        assert!((f.eval(&x) - 12.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let mut expected = DVector::zeros(8);
        for (o, &l) in data.features[3].iter().zip(&data.labels[3]) {
            expected -= DVector::from_column_slice(o) * (0.5 * f64::from(l));
        }
        assert!((f.grad(&x) - expected).amax() < 1e-14);
    }

    #[test]
    fn logistic_single_sample_tail() {
        let f = LogisticObjective::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), vec![1.0], 0.0).unwrap();
        let g = f.grad(&[10.0, 0.0]);
        let expected = -1.0 / (1.0 + 10f64.exp());
        assert!((g[0] - expected).abs() < 1e-18);
        assert!((g[0] + 4.54e-5).abs() < 1e-7);
        assert_eq!(g[1], 0.0);
        let fd = (f.eval(&[10.0 + 1e-5, 0.0]) - f.eval(&[10.0 - 1e-5, 0.0])) / 2e-5;
        assert!((fd - g[0]).abs() < 1e-9);
    }

    #[test]
    fn logistic_hessian_floor() {
        let data = preset();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..data.n {
            let f = make_logistic(&data, i).unwrap();
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (lo, _) = extreme_eigenvalues(&f.hess(&x));
            assert!(lo >= 1e-4 - 1e-12, "node {i}: {lo}");
        }
    }

    #[test]
    fn logistic_is_finite_far_away() {
        let data = preset();
        let f = make_logistic(&data, 0).unwrap();
        for scale in [1e2, 1e3] {
            let x: Vec<f64> = (0..8).map(|k| if k % 2 == 0 { scale } else { -scale }).collect();
            assert!(f.eval(&x).is_finite());
            assert!(f.grad(&x).iter().all(|v| v.is_finite()));
            assert!(f.hess(&x).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn quadratic_identity() {
        let f = make_quadratic(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        let x = [1.0, -2.0, 0.5];
        assert_eq!(f.grad(&x).as_slice(), &x);
        assert_eq!(f.hess(&x), DMatrix::identity(3, 3));
    }

    #[test]
    fn quadratic_rejects_bad_matrices() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(make_quadratic(a, DVector::zeros(2)), Err(Error::NotSymmetric)));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(make_quadratic(indefinite, DVector::zeros(2)).is_err());
        assert!(make_quadratic(DMatrix::identity(2, 2), DVector::zeros(3)).is_err());
    }

    #[test]
    fn dataset_shapes_and_determinism() {
        let a = preset();
        assert_eq!(a.sample_count(), 120);
        assert!(a.features.iter().flatten().all(|row| row.len() == 8));
        assert!(a.labels.iter().flatten().all(|&l| l == 1 || l == -1));
        let b = preset();
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        let c = generate_logistic_data(10, 12, 8, 0.001, 43).unwrap();
        assert_ne!(a.digest(), c.digest());

        let big = generate_logistic_data(50, 10, 20, 0.001, 1).unwrap();
        assert_eq!(big.sample_count(), 500);
        big.validate().unwrap();
    }

    #[test]
    fn dataset_json_round_trip() {
        let a = generate_logistic_data(3, 2, 2, 0.5, 9).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["n", "m", "p", "rho", "seed", "features", "labels"] {
            assert!(value.get(key).is_some(), "{key}");
        }
        let back: LogisticDataset = serde_json::from_str(&json).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn bounds_quadratic_scaled_identity() {
        let terms = generate_quadratic_terms(4, 3, (2.5, 2.5), 1).unwrap();
        let set = ObjectiveSet::quadratic(terms).unwrap();
        assert_eq!(convexity_bounds(&set).unwrap(), ObjectiveBounds { mu_f: 2.5, l_f: 2.5 });
    }

    #[test]
    fn bounds_logistic_cover_sampled_hessians() {
        let data = preset();
        let set = ObjectiveSet::logistic(&data).unwrap();
        let bounds = convexity_bounds(&set).unwrap();
        assert!((bounds.mu_f - 1e-4).abs() < 1e-18);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut min_seen = f64::INFINITY;
        for _ in 0..100 {
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            for f in set.iter() {
                let (lo, hi) = extreme_eigenvalues(&f.hess(&x));
                assert!(hi <= bounds.l_f + 1e-9);
                assert!(lo >= bounds.mu_f - 1e-9);
                min_seen = min_seen.min(lo);
            }
        }
        assert!(min_seen >= bounds.mu_f - 1e-9);
    }

    #[derive(Debug)]
    struct Opaque;

    impl LocalObjective for Opaque {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64]) -> f64 {
            x[0].cosh()
        }
        fn grad(&self, x: &[f64]) -> DVector<f64> {
            DVector::from_element(1, x[0].sinh())
        }
        fn hess(&self, x: &[f64]) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, x[0].cosh())
        }
    }

    #[test]
    fn bounds_reject_unknown_family() {
        let set = ObjectiveSet::new(vec![Box::new(Opaque)]).unwrap();
        assert!(matches!(convexity_bounds(&set), Err(Error::UnknownBounds { node: 0 })));
    }

    #[test]
    fn derivative_check_quadratic_is_tight() {
        let terms = generate_quadratic_terms(1, 4, (0.5, 3.0), 2).unwrap();
        let (a, b) = terms.into_iter().next().unwrap();
        let f = make_quadratic(a, b).unwrap();
        let report = derivative_check(&f, &[0.3, -1.2, 0.8, 2.0], 1e-4).unwrap();
        assert!(report.gradient_error < 1e-9, "{report:?}");
        assert!(report.passed());
    }

    #[test]
    fn derivative_check_logistic_origin() {
        let data = preset();
        let f = make_logistic(&data, 0).unwrap();
        let report = derivative_check(&f, &[0.0; 8], 1e-5).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[derive(Debug)]
    struct Corrupted(LogisticObjective);

    impl LocalObjective for Corrupted {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn eval(&self, x: &[f64]) -> f64 {
            self.0.eval(x)
        }
        fn grad(&self, x: &[f64]) -> DVector<f64> {
            let mut g = self.0.grad(x);
            g[2] += 0.1;
            g
        }
        fn hess(&self, x: &[f64]) -> DMatrix<f64> {
            self.0.hess(x)
        }
    }

    #[test]
    fn derivative_check_flags_corrupted_gradient() {
        let f = Corrupted(make_logistic(&preset(), 0).unwrap());
        let report = derivative_check(&f, &[0.1; 8], 1e-5).unwrap();
        assert!(!report.gradient_ok);
        assert!(!report.passed());
    }

    #[test]
    fn derivative_check_rejects_bad_step() {
        let f = make_logistic(&preset(), 0).unwrap();
        assert!(derivative_check(&f, &[0.0; 8], 1e-2).is_err());
        assert!(derivative_check(&f, &[0.0; 8], 1e-9).is_err());
    }
}
