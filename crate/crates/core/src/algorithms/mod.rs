//! Decentralized iterations and the centralized reference solver.
//!
//! Every method is a value type whose [`DecentralizedMethod::step`] maps the
//! state at iteration `t` to the state at `t + 1` without mutating anything,
//! so a run is a fold over steps. Within a step all nodes read iteration-`t`
//! data and write iteration-`t + 1` data; per-node work is done in node index
//! order, which makes results independent of how the work is scheduled.

mod first_order;
mod newton_tracking;
mod primal_dual;
mod reference;
mod stacked;

use nalgebra::{DMatrix, DVector};

pub use first_order::{Dlm, Extra, GradientTracking};
pub use newton_tracking::NewtonTracking;
pub use primal_dual::{PrimalDual, SqForm};
pub use reference::{centralized_reference, Reference, REFERENCE_MAX_ITER, REFERENCE_TOL};
pub use stacked::{block_apply, disagreement, kron_apply, local_hessians, mix, stacked_gradient, StackedVector};

use crate::error::{Error, Result};
use crate::objectives::ObjectiveSet;
use crate::topology::MixingMatrix;

/// One synchronous decentralized iteration.
pub trait DecentralizedMethod: Clone + Send + Sync {
    fn name(&self) -> &'static str;

    /// Iteration counter `t` of the current iterate.
    fn iteration(&self) -> usize;

    /// Stacked primal iterate `x^t`.
    fn iterate(&self) -> &StackedVector;

    fn step(&self, objectives: &ObjectiveSet, mixing: &MixingMatrix) -> Result<Self>;

    /// Length-`p` vectors each node sends to each neighbour per iteration.
    fn vectors_per_exchange(&self) -> usize {
        1
    }

    /// Stationarity residual `||∇f(x) + (I-W)^{1/2} v||`. Methods without a
    /// dual variable report its minimum over `v`, which is the norm of the
    /// consensus component of `∇f(x)`.
    fn dual_residual(&self, objectives: &ObjectiveSet) -> f64 {
        consensus_component_norm(&stacked_gradient(objectives, self.iterate()))
    }

    /// `(I-W)^{1/2} v^t` for methods with an (explicit or implied) dual.
    fn dual_image(&self) -> Option<StackedVector> {
        None
    }

    /// Residual of the Newton-tracking conservation identity, where defined.
    fn tracking_residual(&self) -> Option<f64> {
        None
    }
}

/// `sqrt(n) ||mean_i g_i||`, the distance from `g` to the range of
/// `(I-W)^{1/2} ⊗ I_p`.
pub fn consensus_component_norm(g: &StackedVector) -> f64 {
    (g.blocks_count() as f64).sqrt() * g.block_mean().norm()
}

/// Neighbour-exchange barriers and scalar payload accumulated by a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CommCost {
    pub rounds: u64,
    pub scalars: u64,
}

impl CommCost {
    /// Cost of one iteration of `method` on `mixing`.
    pub fn per_step<M: DecentralizedMethod>(method: &M, mixing: &MixingMatrix) -> CommCost {
        let p = method.iterate().block_len() as u64;
        CommCost {
            rounds: 1,
            scalars: method.vectors_per_exchange() as u64 * p * mixing.directed_links() as u64,
        }
    }

    pub fn plus(self, other: CommCost) -> CommCost {
        CommCost {
            rounds: self.rounds + other.rounds,
            scalars: self.scalars + other.scalars,
        }
    }
}

/// Runs `iterations` steps and returns every iterate, `x^0` included.
pub fn trajectory<M: DecentralizedMethod>(
    start: &M,
    objectives: &ObjectiveSet,
    mixing: &MixingMatrix,
    iterations: usize,
) -> Result<Vec<M>> {
    let mut states = Vec::with_capacity(iterations + 1);
    states.push(start.clone());
    for _ in 0..iterations {
        let next = states.last().expect("nonempty").step(objectives, mixing)?;
        states.push(next);
    }
    Ok(states)
}

pub(crate) fn check_problem(objectives: &ObjectiveSet, mixing: &MixingMatrix) -> Result<()> {
    if objectives.node_count() != mixing.node_count() {
        return Err(Error::DimensionMismatch {
            expected: mixing.node_count(),
            found: objectives.node_count(),
        });
    }
    Ok(())
}

/// Adds `eps` to the diagonal of every block.
pub(crate) fn regularize(mut blocks: Vec<DMatrix<f64>>, eps: f64) -> Vec<DMatrix<f64>> {
    for h in &mut blocks {
        for k in 0..h.nrows() {
            h[(k, k)] += eps;
        }
    }
    blocks
}

/// Solves `H_i z_i = r_i` for every node by Cholesky factorization.
pub(crate) fn solve_blocks(blocks: &[DMatrix<f64>], rhs: &StackedVector) -> Result<StackedVector> {
    let p = rhs.block_len();
    let mut solutions = Vec::with_capacity(blocks.len());
    for (node, (h, r)) in blocks.iter().zip(rhs.blocks()).enumerate() {
        let chol = h.clone().cholesky().ok_or(Error::NotPositiveDefinite { node })?;
        solutions.push(chol.solve(&DVector::from_column_slice(r)));
    }
    Ok(StackedVector::from_blocks(solutions, p))
}
