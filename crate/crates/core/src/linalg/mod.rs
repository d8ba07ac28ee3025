//! Sparse kernel: CSR matrices, banded LU, dense inverse and Perron power iteration.

mod lu;
mod power;
mod sparse;

pub use lu::{dense_inverse, lu_solve, DenseMat, LuFactor, TOL_LIN};
pub use power::{power_iteration, power_iteration_until, Interval, PowerResult};
pub use sparse::SparseMat;

pub use lu::inf_norm;
