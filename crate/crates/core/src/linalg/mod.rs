//! Dense complex linear algebra: tensor products, auxiliary-space blocks,
//! determinants, solves and a nonsymmetric eigensolver.

pub mod eig;
pub mod matrix;
pub mod scalar;

pub use eig::{eig, eigenvalues, Eigen};
pub use matrix::{
    aux_blocks, axpy, basis, cdot, det, dot, embed_pair, embed_site, inverse, kron, kron_all, relative_residual,
    relative_residual_vec, solve, trace_aux, vnorm, vscale, vsub, ComplexMatrix,
};
pub use scalar::{c, cabs, cabs64, cr, csqrt, Extended, Real, C};

use crate::error::{Error, Result};

/// Operator on the quantum space of `sites` spins, a `2^sites` square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumOperator<T: Real> {
    sites: usize,
    matrix: ComplexMatrix<T>,
}

impl<T: Real> QuantumOperator<T> {
    pub fn new(sites: usize, matrix: ComplexMatrix<T>) -> Result<Self> {
        let dim = 1usize << sites;
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        Ok(Self { sites, matrix })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }

    pub fn apply(&self, v: &[C<T>]) -> Vec<C<T>> {
        self.matrix.apply(v)
    }

    pub fn apply_left(&self, v: &[C<T>]) -> Vec<C<T>> {
        self.matrix.apply_left(v)
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            sites: self.sites,
            matrix: self.matrix.matmul(&other.matrix),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.matrix.frobenius_f64()
    }
}
