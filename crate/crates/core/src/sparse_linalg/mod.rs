//! Sparse matrices, a direct LU solver, and saddle-point solves.

mod lu;
mod matrix;
mod ordering;
mod saddle;

pub use lu::{lu_solve, LuFactorization};
pub use matrix::SparseMatrix;
pub use ordering::nested_dissection;
pub use saddle::{constraint_residual, dependent_rows, saddle_solve, SaddleFactorization};

