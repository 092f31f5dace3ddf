//! Modified algebraic Bethe ansatz for the open spin-1/2 XXX chain with
//! general integrable boundaries, plus brute-force verification of its
//! scalar-product determinant formulas on small chains.

pub mod algebra;
pub mod bethe;
pub mod chain;
pub mod double_row;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod sampling;
pub mod scalar_products;
pub mod vectors;

pub use algebra::{BoundaryParams, ChainSpec};
pub use chain::Chain;
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Extended, QuantumOperator, Real, C};
