use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::ObjectiveSet;
use crate::topology::MixingMatrix;

/// `n` blocks of length `p` laid out contiguously: block `i` is node `i`'s
/// local copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedVector {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl StackedVector {
    pub fn zeros(n: usize, p: usize) -> Self {
        StackedVector {
            n,
            p,
            data: vec![0.0; n * p],
        }
    }

    pub fn from_vec(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        Ok(StackedVector { n, p, data })
    }

    /// `1_n ⊗ x`.
    pub fn replicate(n: usize, x: &[f64]) -> Self {
        let p = x.len();
        let mut data = Vec::with_capacity(n * p);
        for _ in 0..n {
            data.extend_from_slice(x);
        }
        StackedVector { n, p, data }
    }

    pub fn from_blocks(blocks: impl IntoIterator<Item = DVector<f64>>, p: usize) -> Self {
        let mut data = Vec::new();
        let mut n = 0;
        for b in blocks {
            debug_assert_eq!(b.len(), p);
            data.extend_from_slice(b.as_slice());
            n += 1;
        }
        StackedVector { n, p, data }
    }

    pub fn blocks_count(&self) -> usize {
        self.n
    }

    pub fn block_len(&self) -> usize {
        self.p
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// `sum_i x_i`, accumulated in node order.
    pub fn block_sum(&self) -> DVector<f64> {
        let mut s = DVector::zeros(self.p);
        for b in self.blocks() {
            for (acc, v) in s.iter_mut().zip(b) {
                *acc += v;
            }
        }
        s
    }

    pub fn block_mean(&self) -> DVector<f64> {
        self.block_sum() / self.n as f64
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }

    pub fn scaled(&self, c: f64) -> Self {
        self * c
    }

    pub fn check_shape(&self, n: usize, p: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.n,
            });
        }
        if self.p != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: self.p,
            });
        }
        Ok(())
    }
}

impl<'a> Add<&'a StackedVector> for &'a StackedVector {
    type Output = StackedVector;
    fn add(self, rhs: &StackedVector) -> StackedVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl<'a> Sub<&'a StackedVector> for &'a StackedVector {
    type Output = StackedVector;
    fn sub(self, rhs: &StackedVector) -> StackedVector {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul<f64> for &StackedVector {
    type Output = StackedVector;
    fn mul(self, c: f64) -> StackedVector {
        StackedVector {
            n: self.n,
            p: self.p,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

impl AddAssign<&StackedVector> for StackedVector {
    fn add_assign(&mut self, rhs: &StackedVector) {
        debug_assert_eq!((self.n, self.p), (rhs.n, rhs.p));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&StackedVector> for StackedVector {
    fn sub_assign(&mut self, rhs: &StackedVector) {
        debug_assert_eq!((self.n, self.p), (rhs.n, rhs.p));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// `(W ⊗ I_p) x`: each node averages its neighbours' blocks.
pub fn mix(w: &MixingMatrix, x: &StackedVector) -> StackedVector {
    let mut out = StackedVector::zeros(x.n, x.p);
    for i in 0..x.n {
        let dst = &mut out.data[i * x.p..(i + 1) * x.p];
        for &(j, wij) in w.row(i) {
            for (d, v) in dst.iter_mut().zip(x.block(j)) {
                *d += wij * v;
            }
        }
    }
    out
}

/// `((I - W) ⊗ I_p) x`, the per-node consensus error `x_i - sum_j w_ij x_j`.
pub fn disagreement(w: &MixingMatrix, x: &StackedVector) -> StackedVector {
    let avg = mix(w, x);
    x - &avg
}

/// `(M ⊗ I_p) x` for a dense `n x n` matrix `M`.
pub fn kron_apply(m: &DMatrix<f64>, x: &StackedVector) -> StackedVector {
    let mut out = StackedVector::zeros(x.n, x.p);
    for i in 0..x.n {
        let dst = &mut out.data[i * x.p..(i + 1) * x.p];
        for j in 0..x.n {
            let mij = m[(i, j)];
            if mij == 0.0 {
                continue;
            }
            for (d, v) in dst.iter_mut().zip(x.block(j)) {
                *d += mij * v;
            }
        }
    }
    out
}

/// `∇f(x) = [∇f_1(x_1); ...; ∇f_n(x_n)]`.
pub fn stacked_gradient(objectives: &ObjectiveSet, x: &StackedVector) -> StackedVector {
    StackedVector::from_blocks(objectives.iter().zip(x.blocks()).map(|(f, xi)| f.grad(xi)), x.p)
}

/// Block-diagonal `∇²f(x)` as its diagonal blocks.
pub fn local_hessians(objectives: &ObjectiveSet, x: &StackedVector) -> Vec<DMatrix<f64>> {
    objectives.iter().zip(x.blocks()).map(|(f, xi)| f.hess(xi)).collect()
}

/// `H x` for block-diagonal `H`.
pub fn block_apply(blocks: &[DMatrix<f64>], x: &StackedVector) -> StackedVector {
    StackedVector::from_blocks(
        blocks
            .iter()
            .zip(x.blocks())
            .map(|(h, xi)| h * DVector::from_column_slice(xi)),
        x.p,
    )
}
