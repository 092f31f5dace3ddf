//! A chain together with its boundary: the object every construction hangs off.

use crate::algebra::{BoundaryParams, ChainSpec};
use crate::linalg::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Chain<T: Real> {
    pub spec: ChainSpec<T>,
    pub boundary: BoundaryParams<T>,
}

impl<T: Real> Chain<T> {
    pub fn new(spec: ChainSpec<T>, boundary: BoundaryParams<T>) -> Self {
        Self { spec, boundary }
    }

    pub fn sites(&self) -> usize {
        self.spec.sites
    }

    /// Quantum-space dimension `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.spec.sites
    }

    pub fn is_diagonal(&self) -> bool {
        self.boundary.diagonal_mode
    }

    pub fn cast<U: Real>(&self) -> Chain<U> {
        Chain {
            spec: self.spec.cast(),
            boundary: self.boundary.cast(),
        }
    }
}
