use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::objectives::ObjectiveSet;

pub const REFERENCE_TOL: f64 = 1e-12;
pub const REFERENCE_MAX_ITER: usize = 1_000_000;

/// Iterations without improving the best gradient norm before giving up.
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x: DVector<f64>,
    /// `||Σ_i ∇f_i(x)||` at the returned point.
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Minimizes `Σ_i f_i` by damped Newton with Armijo backtracking until
/// `||Σ_i ∇f_i(x)|| <= tol`.
pub fn centralized_reference(objectives: &ObjectiveSet, tol: f64) -> Result<Reference> {
    let p = objectives.dim();
    let mut x = DVector::zeros(p);
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for iterations in 0..REFERENCE_MAX_ITER {
        let g = objectives.total_grad(x.as_slice());
        let gnorm = g.norm();
        if gnorm <= tol {
            return Ok(Reference {
                x,
                gradient_norm: gnorm,
                iterations,
            });
        }
        if gnorm < best {
            best = gnorm;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                return Err(Error::ReferenceFailed {
                    iterations,
                    residual: best,
                });
            }
        }
        let h = objectives.total_hess(x.as_slice());
        let direction = match h.cholesky() {
            Some(chol) => -chol.solve(&g),
            None => -&g,
        };
        let value = objectives.total(x.as_slice());
        let slope = g.dot(&direction);
        let mut t = 1.0;
        // once the predicted decrease is below the rounding level of f,
        // Armijo can no longer tell steps apart; take the full Newton step
        let resolvable = -slope > 64.0 * f64::EPSILON * value.abs().max(1.0);
        while resolvable && t >= 1e-12 {
            let trial = &x + &direction * t;
            if objectives.total(trial.as_slice()) <= value + 1e-4 * t * slope {
                break;
            }
            t *= 0.5;
        }
        if t < 1e-12 {
            // no measurable decrease left; the full Newton step is the best
            // move this close to the optimum
            t = 1.0;
        }
        x += direction * t;
    }
    let residual = objectives.total_grad(x.as_slice()).norm();
    Err(Error::ReferenceFailed {
        iterations: REFERENCE_MAX_ITER,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{generate_logistic_data, generate_quadratic_terms, LogisticDataset};
    use nalgebra::DMatrix;

    #[test]
    fn two_node_average() {
        let f = ObjectiveSet::quadratic(vec![
            (DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -1.0)),
            (DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -3.0)),
        ])
        .unwrap();
        let r = centralized_reference(&f, REFERENCE_TOL).unwrap();
        assert!((r.x[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_closed_form() {
        let terms = generate_quadratic_terms(3, 4, (0.3, 4.0), 3).unwrap();
        let a: DMatrix<f64> = terms
            .iter()
            .map(|(a, _)| a.clone())
            .fold(DMatrix::zeros(4, 4), |s, a| s + a);
        let b: DVector<f64> = terms
            .iter()
            .map(|(_, b)| b.clone())
            .fold(DVector::zeros(4), |s, b| s + b);
        let closed = -a.lu().solve(&b).unwrap();
        let f = ObjectiveSet::quadratic(terms).unwrap();
        let r = centralized_reference(&f, REFERENCE_TOL).unwrap();
        assert!((r.x - closed).amax() < 1e-12);
    }

    #[test]
    fn logistic_preset_residual() {
        let data = generate_logistic_data(10, 12, 8, 0.001, 1).unwrap();
        let f = ObjectiveSet::logistic(&data).unwrap();
        let r = centralized_reference(&f, REFERENCE_TOL).unwrap();
        assert!(r.gradient_norm <= 1e-12);
        let direct = f.total_grad(r.x.as_slice()).norm();
        assert!(direct <= 1e-12);
    }

    #[test]
    fn logistic_sign_symmetry() {
        let data = generate_logistic_data(4, 6, 3, 0.01, 12).unwrap();
        let flipped = LogisticDataset {
            features: data
                .features
                .iter()
                .map(|node| node.iter().map(|row| row.iter().map(|v| -v).collect()).collect())
                .collect(),
            labels: data
                .labels
                .iter()
                .map(|node| node.iter().map(|l| -l).collect())
                .collect(),
            ..data.clone()
        };
        let a = centralized_reference(&ObjectiveSet::logistic(&data).unwrap(), REFERENCE_TOL).unwrap();
        let b = centralized_reference(&ObjectiveSet::logistic(&flipped).unwrap(), REFERENCE_TOL).unwrap();
        assert!((a.x - b.x).amax() < 1e-10);
    }
}
