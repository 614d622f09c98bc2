//! The two equivalent rewrites of Newton tracking used as oracles: the
//! linearized augmented-Lagrangian (primal-dual) iteration and its `q`-form.
//! Neither is decentralized as written; the primal-dual form needs the global
//! `(I - W)^{1/2}`.

use nalgebra::DMatrix;

use super::{
    check_problem, disagreement, kron_apply, local_hessians, regularize, solve_blocks, stacked_gradient,
    DecentralizedMethod, StackedVector,
};
use crate::error::{ensure_positive, Error, Result};
use crate::objectives::ObjectiveSet;
use crate::topology::{MixingMatrix, SpectralStats};

/// ```text
/// x^{t+1} = x^t - (H^t)^{-1} [∇f(x^t) + (I-W)^{1/2} v^t + α(I-W) x^t]
/// v^{t+1} = v^t + α (I-W)^{1/2} x^{t+1}
/// ```
#[derive(Debug, Clone)]
pub struct PrimalDual {
    alpha: f64,
    eps: f64,
    t: usize,
    x: StackedVector,
    v: StackedVector,
    sqrt_laplacian: DMatrix<f64>,
}

impl PrimalDual {
    pub fn init(objectives: &ObjectiveSet, spectra: &SpectralStats, alpha: f64, eps: f64) -> Result<Self> {
        let zeros = StackedVector::zeros(objectives.node_count(), objectives.dim());
        Self::from_parts(objectives, spectra, alpha, eps, zeros.clone(), zeros)
    }

    pub fn from_parts(
        objectives: &ObjectiveSet,
        spectra: &SpectralStats,
        alpha: f64,
        eps: f64,
        x: StackedVector,
        v: StackedVector,
    ) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        ensure_positive("epsilon", eps)?;
        let (n, p) = (objectives.node_count(), objectives.dim());
        if spectra.node_count() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: spectra.node_count(),
            });
        }
        x.check_shape(n, p)?;
        v.check_shape(n, p)?;
        Ok(PrimalDual {
            alpha,
            eps,
            t: 0,
            x,
            v,
            sqrt_laplacian: spectra.sqrt_laplacian.clone(),
        })
    }

    pub fn dual(&self) -> &StackedVector {
        &self.v
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl DecentralizedMethod for PrimalDual {
    fn name(&self) -> &'static str {
        "primal_dual"
    }

    fn iteration(&self) -> usize {
        self.t
    }

    fn iterate(&self) -> &StackedVector {
        &self.x
    }

    fn dual_residual(&self, objectives: &ObjectiveSet) -> f64 {
        let mut r = stacked_gradient(objectives, &self.x);
        r += &kron_apply(&self.sqrt_laplacian, &self.v);
        r.norm()
    }

    fn dual_image(&self) -> Option<StackedVector> {
        Some(kron_apply(&self.sqrt_laplacian, &self.v))
    }

    fn step(&self, objectives: &ObjectiveSet, mixing: &MixingMatrix) -> Result<Self> {
        check_problem(objectives, mixing)?;
        let hessians = regularize(local_hessians(objectives, &self.x), self.eps);
        let mut rhs = stacked_gradient(objectives, &self.x);
        rhs += &kron_apply(&self.sqrt_laplacian, &self.v);
        rhs += &disagreement(mixing, &self.x).scaled(self.alpha);
        let x = &self.x - &solve_blocks(&hessians, &rhs)?;
        let v = &self.v + &kron_apply(&self.sqrt_laplacian, &x).scaled(self.alpha);
        Ok(PrimalDual {
            alpha: self.alpha,
            eps: self.eps,
            t: self.t + 1,
            x,
            v,
            sqrt_laplacian: self.sqrt_laplacian.clone(),
        })
    }
}

/// ```text
/// x^{t+1} = x^t - (H^t)^{-1} q^t
/// q^{t+1} = q^t + ∇f(x^{t+1}) - ∇f(x^t) + α(I-W)(2x^{t+1} - x^t)
/// ```
///
/// started from `x^0 = 0`, `q^0 = ∇f(0)`; `u^t = (H^t)^{-1} q^t` recovers the
/// Newton tracking direction.
#[derive(Debug, Clone)]
pub struct SqForm {
    alpha: f64,
    eps: f64,
    t: usize,
    x: StackedVector,
    q: StackedVector,
}

impl SqForm {
    pub fn init(objectives: &ObjectiveSet, mixing: &MixingMatrix, alpha: f64, eps: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        ensure_positive("epsilon", eps)?;
        check_problem(objectives, mixing)?;
        let x = StackedVector::zeros(objectives.node_count(), objectives.dim());
        let q = stacked_gradient(objectives, &x);
        Ok(SqForm { alpha, eps, t: 0, x, q })
    }

    pub fn q(&self) -> &StackedVector {
        &self.q
    }

    /// `s^t = α(I-W)x^t - q^t`.
    pub fn s(&self, mixing: &MixingMatrix) -> StackedVector {
        &disagreement(mixing, &self.x).scaled(self.alpha) - &self.q
    }

    /// `u^t = (H^t)^{-1} q^t`.
    pub fn direction(&self, objectives: &ObjectiveSet) -> Result<StackedVector> {
        let hessians = regularize(local_hessians(objectives, &self.x), self.eps);
        solve_blocks(&hessians, &self.q)
    }
}

impl DecentralizedMethod for SqForm {
    fn name(&self) -> &'static str {
        "sq_form"
    }

    fn iteration(&self) -> usize {
        self.t
    }

    fn iterate(&self) -> &StackedVector {
        &self.x
    }

    fn step(&self, objectives: &ObjectiveSet, mixing: &MixingMatrix) -> Result<Self> {
        let x = &self.x - &self.direction(objectives)?;
        let mut q = self.q.clone();
        q += &stacked_gradient(objectives, &x);
        q -= &stacked_gradient(objectives, &self.x);
        let extrapolated = &x.scaled(2.0) - &self.x;
        q += &disagreement(mixing, &extrapolated).scaled(self.alpha);
        Ok(SqForm {
            alpha: self.alpha,
            eps: self.eps,
            t: self.t + 1,
            x,
            q,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{centralized_reference, trajectory, NewtonTracking};
    use crate::objectives::generate_quadratic_terms;
    use crate::topology::{build_topology, metropolis_weights, spectral_stats, TopologyKind};

    fn problem() -> (ObjectiveSet, MixingMatrix, SpectralStats) {
        let f = ObjectiveSet::quadratic(generate_quadratic_terms(3, 2, (0.5, 3.0), 3).unwrap()).unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Line, 3, 1.0, 0).unwrap());
        let s = spectral_stats(&w).unwrap();
        (f, w, s)
    }

    #[test]
    fn first_iterate_matches_newton_tracking() {
        let (f, w, s) = problem();
        let nt = NewtonTracking::init(&f, &w, 0.8, 2.0).unwrap();
        let pd = PrimalDual::init(&f, &s, 0.8, 2.0).unwrap().step(&f, &w).unwrap();
        let expected = &StackedVector::zeros(3, 2) - nt.direction();
        assert!(pd.iterate().distance(&expected) < 1e-15);
    }

    #[test]
    fn sq_initial_direction_matches() {
        let (f, w, _) = problem();
        let nt = NewtonTracking::init(&f, &w, 0.8, 2.0).unwrap();
        let sq = SqForm::init(&f, &w, 0.8, 2.0).unwrap();
        assert!(sq.direction(&f).unwrap().distance(nt.direction()) < 1e-15);
        // s^0 = α(I-W)0 - q^0
        assert!((&sq.s(&w) + sq.q()).max_abs() == 0.0);
    }

    #[test]
    fn ten_step_trajectories_coincide() {
        let (f, w, s) = problem();
        let nt = trajectory(&NewtonTracking::init(&f, &w, 0.8, 2.0).unwrap(), &f, &w, 10).unwrap();
        let pd = trajectory(&PrimalDual::init(&f, &s, 0.8, 2.0).unwrap(), &f, &w, 10).unwrap();
        let sq = trajectory(&SqForm::init(&f, &w, 0.8, 2.0).unwrap(), &f, &w, 10).unwrap();
        for t in 0..=10 {
            assert!(nt[t].iterate().distance(pd[t].iterate()) < 1e-10, "t = {t}");
            assert!(nt[t].iterate().distance(sq[t].iterate()) < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn kkt_pair_is_fixed_point() {
        let (f, w, s) = problem();
        let star = centralized_reference(&f, 1e-13).unwrap();
        let x = StackedVector::replicate(3, star.x.as_slice());
        let g = stacked_gradient(&f, &x);
        let v = kron_apply(&s.sqrt_laplacian_pinv(), &g).scaled(-1.0);
        let pd = PrimalDual::from_parts(&f, &s, 0.8, 2.0, x.clone(), v.clone()).unwrap();
        let next = pd.step(&f, &w).unwrap();
        assert!(next.iterate().distance(&x) < 1e-12);
        assert!(next.dual().distance(&v) < 1e-12);
    }

    #[test]
    fn scalar_sq_matches_hand_recursion() {
        let f = ObjectiveSet::quadratic(vec![(
            DMatrix::from_element(1, 1, 1.0),
            nalgebra::DVector::from_element(1, -1.0),
        )])
        .unwrap();
        let w = metropolis_weights(&build_topology(TopologyKind::Line, 1, 1.0, 0).unwrap());
        let traj = trajectory(&SqForm::init(&f, &w, 1.0, 1.0).unwrap(), &f, &w, 3).unwrap();
        let xs: Vec<f64> = traj.iter().map(|s| s.iterate().as_slice()[0]).collect();
        for (x, expected) in xs.iter().zip([0.0, 0.5, 0.75, 0.875]) {
            assert!((x - expected).abs() < 1e-15, "{xs:?}");
        }
    }
}
