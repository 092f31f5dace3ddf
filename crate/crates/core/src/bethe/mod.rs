//! Kernel functions, eigenvalues, Bethe equations and their solver.

pub mod eigenvalue;
pub mod kernels;
pub mod solver;
