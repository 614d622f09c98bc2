use nalgebra::DMatrix;

use super::{
    block_apply, check_problem, disagreement, local_hessians, regularize, solve_blocks, stacked_gradient,
    DecentralizedMethod, StackedVector,
};
use crate::error::{ensure_positive, Result};
use crate::objectives::ObjectiveSet;
use crate::topology::MixingMatrix;

/// Newton tracking.
///
/// Node `i` keeps `x_i` and a direction estimate `u_i` and iterates
///
/// ```text
/// x_i <- x_i - u_i
/// u_i <- (H_i^{t+1})^{-1} [ H_i^t u_i + ∇f_i(x_i^{t+1}) - ∇f_i(x_i^t)
///                           + 2α (I-W)x^{t+1}|_i - α (I-W)x^t|_i ]
/// ```
///
/// with `H_i^t = ∇²f_i(x_i^t) + εI`. Starting from `x = 0` and
/// `u_i = (H_i^0)^{-1} ∇f_i(0)`, the sum `Σ H_i u_i` equals `Σ ∇f_i(x_i)` at
/// every iteration.
#[derive(Debug, Clone)]
pub struct NewtonTracking {
    alpha: f64,
    eps: f64,
    t: usize,
    x: StackedVector,
    u: StackedVector,
    hessians: Vec<DMatrix<f64>>,
    grad: StackedVector,
    disagreement: StackedVector,
}

impl NewtonTracking {
    pub fn init(objectives: &ObjectiveSet, mixing: &MixingMatrix, alpha: f64, eps: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        ensure_positive("epsilon", eps)?;
        check_problem(objectives, mixing)?;
        let x = StackedVector::zeros(objectives.node_count(), objectives.dim());
        let hessians = regularize(local_hessians(objectives, &x), eps);
        let grad = stacked_gradient(objectives, &x);
        let u = solve_blocks(&hessians, &grad)?;
        let disagreement = disagreement(mixing, &x);
        Ok(NewtonTracking {
            alpha,
            eps,
            t: 0,
            x,
            u,
            hessians,
            grad,
            disagreement,
        })
    }

    /// Starts from an arbitrary `(x, u)` pair. The conservation identity only
    /// holds afterwards if it holds for the supplied pair.
    pub fn from_parts(
        objectives: &ObjectiveSet,
        mixing: &MixingMatrix,
        alpha: f64,
        eps: f64,
        x: StackedVector,
        u: StackedVector,
    ) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        ensure_positive("epsilon", eps)?;
        check_problem(objectives, mixing)?;
        x.check_shape(objectives.node_count(), objectives.dim())?;
        u.check_shape(objectives.node_count(), objectives.dim())?;
        Ok(NewtonTracking {
            alpha,
            eps,
            t: 0,
            hessians: regularize(local_hessians(objectives, &x), eps),
            grad: stacked_gradient(objectives, &x),
            disagreement: disagreement(mixing, &x),
            x,
            u,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn direction(&self) -> &StackedVector {
        &self.u
    }

    pub fn gradient(&self) -> &StackedVector {
        &self.grad
    }

    /// Regularized local Hessians `∇²f_i(x_i^t) + εI`.
    pub fn regularized_hessians(&self) -> &[DMatrix<f64>] {
        &self.hessians
    }

    /// `||Σ_i H_i u_i - Σ_i ∇f_i(x_i)|| / (||Σ_i ∇f_i(x_i)|| + 1)`.
    pub fn conservation_residual(&self) -> f64 {
        let tracked = block_apply(&self.hessians, &self.u).block_sum();
        let total = self.grad.block_sum();
        (tracked - &total).norm() / (total.norm() + 1.0)
    }

    /// `(I-W)^{1/2} v^t` of the equivalent primal-dual iteration:
    /// `H^t u^t - ∇f(x^t) - α(I-W)x^t`.
    pub fn implied_dual_image(&self) -> StackedVector {
        let mut out = block_apply(&self.hessians, &self.u);
        out -= &self.grad;
        out -= &self.disagreement.scaled(self.alpha);
        out
    }
}

impl DecentralizedMethod for NewtonTracking {
    fn name(&self) -> &'static str {
        "newton_tracking"
    }

    fn iteration(&self) -> usize {
        self.t
    }

    fn iterate(&self) -> &StackedVector {
        &self.x
    }

    fn dual_residual(&self, _objectives: &ObjectiveSet) -> f64 {
        // ∇f(x) + (I-W)^{1/2} v = H u - α(I-W)x
        let mut r = block_apply(&self.hessians, &self.u);
        r -= &self.disagreement.scaled(self.alpha);
        r.norm()
    }

    fn dual_image(&self) -> Option<StackedVector> {
        Some(self.implied_dual_image())
    }

    fn tracking_residual(&self) -> Option<f64> {
        Some(self.conservation_residual())
    }

    fn step(&self, objectives: &ObjectiveSet, mixing: &MixingMatrix) -> Result<Self> {
        let x = &self.x - &self.u;
        let grad = stacked_gradient(objectives, &x);
        let disagreement = disagreement(mixing, &x);
        let hessians = regularize(local_hessians(objectives, &x), self.eps);

        let mut rhs = block_apply(&self.hessians, &self.u);
        rhs += &grad;
        rhs -= &self.grad;
        rhs += &disagreement.scaled(2.0 * self.alpha);
        rhs -= &self.disagreement.scaled(self.alpha);
        let u = solve_blocks(&hessians, &rhs)?;

        Ok(NewtonTracking {
            alpha: self.alpha,
            eps: self.eps,
            t: self.t + 1,
            x,
            u,
            hessians,
            grad,
            disagreement,
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

    fn scalar_problem() -> (ObjectiveSet, MixingMatrix) {
        let f =
            ObjectiveSet::quadratic(vec![(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -1.0))]).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Line, 1, 1.0, 0).unwrap());
        (f, w)
    }

    #[test]
    fn scalar_initial_direction() {
        let (f, w) = scalar_problem();
        let nt = NewtonTracking::init(&f, &w, 1.0, 1.0).unwrap();
        assert!((nt.direction().as_slice()[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn scalar_iterates_halve_the_error() {
        let (f, w) = scalar_problem();
        let start = NewtonTracking::init(&f, &w, 1.0, 1.0).unwrap();
        let traj = trajectory(&start, &f, &w, 3).unwrap();
        let xs: Vec<f64> = traj.iter().map(|s| s.iterate().as_slice()[0]).collect();
        for (x, expected) in xs.iter().zip([0.0, 0.5, 0.75, 0.875]) {
            assert!((x - expected).abs() < 1e-15, "{xs:?}");
        }
    }

    #[test]
    fn zero_linear_terms_start_optimal() {
        let mut terms = generate_quadratic_terms(3, 2, (0.5, 2.0), 4).unwrap();
        for (_, b) in &mut terms {
            b.fill(0.0);
        }
        let f = ObjectiveSet::quadratic(terms).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Complete, 3, 1.0, 0).unwrap());
        let nt = NewtonTracking::init(&f, &w, 0.5, 1.0).unwrap();
        assert_eq!(nt.direction().max_abs(), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let (f, w) = scalar_problem();
        assert!(NewtonTracking::init(&f, &w, 0.0, 1.0).is_err());
        assert!(NewtonTracking::init(&f, &w, 1.0, -1.0).is_err());
        assert!(NewtonTracking::init(&f, &w, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn fixed_point_is_stationary() {
        let terms = generate_quadratic_terms(4, 3, (0.5, 2.0), 8).unwrap();
        let f = ObjectiveSet::quadratic(terms).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Cycle, 4, 1.0, 0).unwrap());
        let star = centralized_reference(&f, 1e-13).unwrap();
        let x = StackedVector::replicate(4, star.x.as_slice());
        let nt = NewtonTracking::from_parts(&f, &w, 0.7, 1.5, x.clone(), StackedVector::zeros(4, 3)).unwrap();
        let next = nt.step(&f, &w).unwrap();
        assert!(next.iterate().distance(&x) < 1e-12);
        assert!(next.direction().max_abs() < 1e-12);
    }

    #[test]
    fn conservation_on_logistic_preset() {
        let data = generate_logistic_data(10, 12, 8, 0.001, 1).unwrap();
        let f = ObjectiveSet::logistic(&data).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Random, 10, 0.5, 1).unwrap());
        let mut nt = NewtonTracking::init(&f, &w, 3.3, 3.0).unwrap();
        assert!(nt.conservation_residual() < 1e-12);
        for _ in 0..50 {
            nt = nt.step(&f, &w).unwrap();
            assert!(nt.conservation_residual() < 1e-9);
        }
    }
}
