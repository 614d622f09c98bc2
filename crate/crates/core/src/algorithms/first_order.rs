//! First-order baselines: gradient tracking, EXTRA and DLM.

use super::{check_problem, consensus_component_norm, mix, stacked_gradient, DecentralizedMethod, StackedVector};
use crate::error::{ensure_positive, Error, Result};
use crate::objectives::ObjectiveSet;
use crate::topology::{Graph, MixingMatrix};

/// ```text
/// x^{t+1} = W x^t - α y^t
/// y^{t+1} = W y^t + ∇f(x^{t+1}) - ∇f(x^t)
/// ```
/// with `y^0 = ∇f(x^0)`. `x` and `y` travel together in one exchange.
#[derive(Debug, Clone)]
pub struct GradientTracking {
    alpha: f64,
    t: usize,
    x: StackedVector,
    y: StackedVector,
    grad: StackedVector,
}

impl GradientTracking {
    pub fn init(objectives: &ObjectiveSet, mixing: &MixingMatrix, alpha: f64) -> Result<Self> {
        let x = StackedVector::zeros(objectives.node_count(), objectives.dim());
        Self::init_at(objectives, mixing, alpha, x)
    }

    pub fn init_at(objectives: &ObjectiveSet, mixing: &MixingMatrix, alpha: f64, x: StackedVector) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        check_problem(objectives, mixing)?;
        x.check_shape(objectives.node_count(), objectives.dim())?;
        let grad = stacked_gradient(objectives, &x);
        Ok(GradientTracking {
            alpha,
            t: 0,
            y: grad.clone(),
            x,
            grad,
        })
    }

    pub fn tracker(&self) -> &StackedVector {
        &self.y
    }

    /// `||mean_i y_i - mean_i ∇f_i(x_i)||`, zero in exact arithmetic.
    pub fn average_residual(&self) -> f64 {
        (self.y.block_mean() - self.grad.block_mean()).norm()
    }
}

impl DecentralizedMethod for GradientTracking {
    fn name(&self) -> &'static str {
        "gradient_tracking"
    }

    fn iteration(&self) -> usize {
        self.t
    }

    fn iterate(&self) -> &StackedVector {
        &self.x
    }

    fn dual_residual(&self, _objectives: &ObjectiveSet) -> f64 {
        consensus_component_norm(&self.grad)
    }

    fn vectors_per_exchange(&self) -> usize {
        2
    }

    fn step(&self, objectives: &ObjectiveSet, mixing: &MixingMatrix) -> Result<Self> {
        let x = &mix(mixing, &self.x) - &self.y.scaled(self.alpha);
        let grad = stacked_gradient(objectives, &x);
        let mut y = mix(mixing, &self.y);
        y += &grad;
        y -= &self.grad;
        Ok(GradientTracking {
            alpha: self.alpha,
            t: self.t + 1,
            x,
            y,
            grad,
        })
    }
}

#[derive(Debug, Clone)]
struct History {
    x: StackedVector,
    grad: StackedVector,
}

/// EXTRA in its two-term form
///
/// ```text
/// x^{t+2} = (I+W) x^{t+1} - (I+W) x^t / 2 - α [∇f(x^{t+1}) - ∇f(x^t)]
/// ```
/// bootstrapped with `x^1 = W x^0 - α ∇f(x^0)`.
#[derive(Debug, Clone)]
pub struct Extra {
    alpha: f64,
    t: usize,
    x: StackedVector,
    grad: StackedVector,
    prev: Option<History>,
}

impl Extra {
    pub fn init(objectives: &ObjectiveSet, mixing: &MixingMatrix, alpha: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        check_problem(objectives, mixing)?;
        let x = StackedVector::zeros(objectives.node_count(), objectives.dim());
        Ok(Extra {
            alpha,
            t: 0,
            grad: stacked_gradient(objectives, &x),
            x,
            prev: None,
        })
    }

    /// Resumes the two-term recursion from `(x^t, x^{t+1}) = (previous, current)`.
    pub fn from_history(
        objectives: &ObjectiveSet,
        mixing: &MixingMatrix,
        alpha: f64,
        previous: StackedVector,
        current: StackedVector,
    ) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        check_problem(objectives, mixing)?;
        previous.check_shape(objectives.node_count(), objectives.dim())?;
        current.check_shape(objectives.node_count(), objectives.dim())?;
        Ok(Extra {
            alpha,
            t: 1,
            grad: stacked_gradient(objectives, &current),
            x: current,
            prev: Some(History {
                grad: stacked_gradient(objectives, &previous),
                x: previous,
            }),
        })
    }
}

impl DecentralizedMethod for Extra {
    fn name(&self) -> &'static str {
        "extra"
    }

    fn iteration(&self) -> usize {
        self.t
    }

    fn iterate(&self) -> &StackedVector {
        &self.x
    }

    fn dual_residual(&self, _objectives: &ObjectiveSet) -> f64 {
        consensus_component_norm(&self.grad)
    }

    fn step(&self, objectives: &ObjectiveSet, mixing: &MixingMatrix) -> Result<Self> {
        let x = match &self.prev {
            None => &mix(mixing, &self.x) - &self.grad.scaled(self.alpha),
            Some(prev) => {
                // (I+W)x^{t+1} - (I+W)x^t/2, one exchange of the combined vector
                let combined = &self.x - &prev.x.scaled(0.5);
                let mut next = &combined + &mix(mixing, &combined);
                let dg = &self.grad - &prev.grad;
                next -= &dg.scaled(self.alpha);
                next
            }
        };
        let grad = stacked_gradient(objectives, &x);
        Ok(Extra {
            alpha: self.alpha,
            t: self.t + 1,
            prev: Some(History {
                x: self.x.clone(),
                grad: self.grad.clone(),
            }),
            x,
            grad,
        })
    }
}

/// DLM in its two-term form
///
/// ```text
/// x^{t+2} = (I - α D L)(2x^{t+1} - x^t) - D [∇f(x^{t+1}) - ∇f(x^t)]
/// ```
/// with `L` the graph Laplacian and `D = diag(1 / (2α d_i + ε))`,
/// bootstrapped with `x^1 = (I - α D L) x^0 - D ∇f(x^0)`.
#[derive(Debug, Clone)]
pub struct Dlm {
    alpha: f64,
    eps: f64,
    t: usize,
    x: StackedVector,
    grad: StackedVector,
    prev: Option<History>,
    /// `(degree, neighbours)` per node.
    adjacency: Vec<(f64, Vec<usize>)>,
}

impl Dlm {
    pub fn init(objectives: &ObjectiveSet, graph: &Graph, alpha: f64, eps: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        ensure_positive("epsilon", eps)?;
        if graph.node_count() != objectives.node_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.node_count(),
                found: objectives.node_count(),
            });
        }
        let x = StackedVector::zeros(objectives.node_count(), objectives.dim());
        let adjacency = graph.neighbors().into_iter().map(|nb| (nb.len() as f64, nb)).collect();
        Ok(Dlm {
            alpha,
            eps,
            t: 0,
            grad: stacked_gradient(objectives, &x),
            x,
            prev: None,
            adjacency,
        })
    }

    /// Resumes the two-term recursion from `(x^t, x^{t+1}) = (previous, current)`.
    pub fn from_history(
        objectives: &ObjectiveSet,
        graph: &Graph,
        alpha: f64,
        eps: f64,
        previous: StackedVector,
        current: StackedVector,
    ) -> Result<Self> {
        let mut dlm = Self::init(objectives, graph, alpha, eps)?;
        previous.check_shape(objectives.node_count(), objectives.dim())?;
        current.check_shape(objectives.node_count(), objectives.dim())?;
        dlm.t = 1;
        dlm.grad = stacked_gradient(objectives, &current);
        dlm.x = current;
        dlm.prev = Some(History {
            grad: stacked_gradient(objectives, &previous),
            x: previous,
        });
        Ok(dlm)
    }

    fn scaling(&self, node: usize) -> f64 {
        1.0 / (2.0 * self.alpha * self.adjacency[node].0 + self.eps)
    }

    /// `(I - α D L) z - D g`, node by node.
    fn update(&self, z: &StackedVector, g: &StackedVector) -> StackedVector {
        let p = z.block_len();
        let mut out = z.clone();
        for (i, (degree, neighbours)) in self.adjacency.iter().enumerate() {
            let d = self.scaling(i);
            let mut lap: Vec<f64> = z.block(i).iter().map(|v| degree * v).collect();
            for &j in neighbours {
                for (acc, v) in lap.iter_mut().zip(z.block(j)) {
                    *acc -= v;
                }
            }
            let dst = out.block_mut(i);
            for k in 0..p {
                dst[k] -= self.alpha * d * lap[k] + d * g.block(i)[k];
            }
        }
        out
    }
}

impl DecentralizedMethod for Dlm {
    fn name(&self) -> &'static str {
        "dlm"
    }

    fn iteration(&self) -> usize {
        self.t
    }

    fn iterate(&self) -> &StackedVector {
        &self.x
    }

    fn dual_residual(&self, _objectives: &ObjectiveSet) -> f64 {
        consensus_component_norm(&self.grad)
    }

    fn step(&self, objectives: &ObjectiveSet, _mixing: &MixingMatrix) -> Result<Self> {
        let x = match &self.prev {
            None => self.update(&self.x, &self.grad),
            Some(prev) => {
                let z = &self.x.scaled(2.0) - &prev.x;
                let dg = &self.grad - &prev.grad;
                self.update(&z, &dg)
            }
        };
        let grad = stacked_gradient(objectives, &x);
        Ok(Dlm {
            alpha: self.alpha,
            eps: self.eps,
            t: self.t + 1,
            prev: Some(History {
                x: self.x.clone(),
                grad: self.grad.clone(),
            }),
            x,
            grad,
            adjacency: self.adjacency.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{centralized_reference, trajectory};
    use crate::objectives::{generate_logistic_data, generate_quadratic_terms};
    use crate::topology::{build_topology, metropolis_weights, TopologyKind};
    use nalgebra::{DMatrix, DVector};

    fn scalar() -> (ObjectiveSet, Graph, MixingMatrix) {
        let f =
            ObjectiveSet::quadratic(vec![(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -1.0))]).unwrap();
        let g = build_topology(TopologyKind::Line, 1, 1.0, 0).unwrap();
        let w = metropolis_weights(&g);
        (f, g, w)
    }

    fn xs<M: DecentralizedMethod>(traj: &[M]) -> Vec<f64> {
        traj.iter().map(|s| s.iterate().as_slice()[0]).collect()
    }

    #[test]
    fn gradient_tracking_scalar_is_gradient_descent() {
        let (f, _, w) = scalar();
        let traj = trajectory(&GradientTracking::init(&f, &w, 0.5).unwrap(), &f, &w, 2).unwrap();
        assert_eq!(xs(&traj), vec![0.0, 0.5, 0.75]);
    }

    #[test]
    fn extra_scalar_hand_recursion() {
        let (f, _, w) = scalar();
        let traj = trajectory(&Extra::init(&f, &w, 0.5).unwrap(), &f, &w, 2).unwrap();
        assert_eq!(xs(&traj), vec![0.0, 0.5, 0.75]);
    }

    #[test]
    fn dlm_scalar_substitution() {
        // n = 1: x^{t+2} = 2x^{t+1} - x^t - (1/ε)[∇f(x^{t+1}) - ∇f(x^t)]
        let (f, g, w) = scalar();
        let eps = 4.0;
        let traj = trajectory(&Dlm::init(&f, &g, 0.3, eps).unwrap(), &f, &w, 6).unwrap();
        let x = xs(&traj);
        assert_eq!(x[1], 0.0 - (0.0 - 1.0) / eps);
        for t in 0..5 {
            let expected = 2.0 * x[t + 1] - x[t] - ((x[t + 1] - 1.0) - (x[t] - 1.0)) / eps;
            assert!((x[t + 2] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_tracking_average_identity() {
        let data = generate_logistic_data(10, 12, 8, 0.001, 2).unwrap();
        let f = ObjectiveSet::logistic(&data).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Random, 10, 0.5, 2).unwrap());
        let mut gt = GradientTracking::init(&f, &w, 0.1).unwrap();
        for _ in 0..200 {
            assert!(gt.average_residual() < 1e-10);
            gt = gt.step(&f, &w).unwrap();
        }
    }

    fn consensus_optimum() -> (ObjectiveSet, Graph, MixingMatrix, StackedVector) {
        let f = ObjectiveSet::quadratic(generate_quadratic_terms(5, 3, (0.5, 2.0), 21).unwrap()).unwrap();
        let g = build_topology(TopologyKind::Random, 5, 0.6, 21).unwrap();
        let w = metropolis_weights(&g);
        let star = centralized_reference(&f, 1e-13).unwrap();
        let x = StackedVector::replicate(5, star.x.as_slice());
        (f, g, w, x)
    }

    #[test]
    fn extra_stationary_at_consensus_optimum() {
        let (f, _, w, x) = consensus_optimum();
        let e = Extra::from_history(&f, &w, 0.1, x.clone(), x.clone()).unwrap();
        let next = e.step(&f, &w).unwrap();
        assert!(next.iterate().distance(&x) < 1e-12);
    }

    #[test]
    fn dlm_stationary_at_consensus_optimum() {
        let (f, g, w, x) = consensus_optimum();
        let d = Dlm::from_history(&f, &g, 0.1, 0.1, x.clone(), x.clone()).unwrap();
        let next = d.step(&f, &w).unwrap();
        assert!(next.iterate().distance(&x) < 1e-12);
    }

    #[test]
    fn gradient_tracking_stationary_at_consensus_optimum() {
        let (f, _, w, x) = consensus_optimum();
        let gt = GradientTracking::init_at(&f, &w, 0.1, x.clone()).unwrap();
        // y^0 = ∇f(x*) is not a fixed point of y unless its blocks agree, so
        // only check that the average direction vanishes.
        assert!(gt.tracker().block_mean().norm() < 1e-10);
    }

    #[test]
    fn baselines_reach_the_reference_on_quadratics() {
        let (f, g, w, x) = consensus_optimum();
        let x0 = StackedVector::zeros(5, 3);
        let base = x.distance(&x0);
        let gt = trajectory(&GradientTracking::init(&f, &w, 0.05).unwrap(), &f, &w, 3000).unwrap();
        let ex = trajectory(&Extra::init(&f, &w, 0.2).unwrap(), &f, &w, 3000).unwrap();
        let dl = trajectory(&Dlm::init(&f, &g, 0.5, 0.5).unwrap(), &f, &w, 3000).unwrap();
        assert!(gt.last().unwrap().iterate().distance(&x) / base < 1e-8);
        assert!(ex.last().unwrap().iterate().distance(&x) / base < 1e-8);
        assert!(dl.last().unwrap().iterate().distance(&x) / base < 1e-8);
    }
}
