//! Constrained solves `[A Cᵀ; C 0] (w, λ) = (r, 0)`.

use super::lu::LuFactorization;
use super::ordering::nested_dissection;
use super::matrix::{norm_inf, SparseMatrix};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Factored saddle-point system, reusable across right-hand sides.
#[derive(Clone, Debug)]
pub struct SaddleFactorization<T> {
    n: usize,
    k: usize,
    lu: LuFactorization<T>,
}

impl<T: Scalar> SaddleFactorization<T> {
    pub fn new(a: &SparseMatrix<T>, c: &SparseMatrix<T>) -> Result<Self> {
        let n = a.n_rows();
        let k = c.n_rows();
        if a.n_cols() != n || c.n_cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "saddle system with A {}x{} and C {}x{}",
                a.n_rows(),
                a.n_cols(),
                c.n_rows(),
                c.n_cols()
            )));
        }
        if k >= n && k > 0 {
            return Err(Error::InvalidArgument(format!("{k} constraints for {n} unknowns")));
        }
        let mut t: Vec<(usize, usize, T)> = a.triplets().collect();
        t.reserve(2 * c.nnz());
        for (i, j, v) in c.triplets() {
            t.push((n + i, j, v));
            t.push((j, n + i, v));
        }
        let block = SparseMatrix::from_triplets(n + k, n + k, t)?;
        // multipliers last: their zero diagonal would otherwise force off-diagonal pivots
        let mut order = nested_dissection(a);
        order.extend(n..n + k);
        let lu = match LuFactorization::with_ordering(&block, order) {
            Ok(lu) => lu,
            Err(Error::SingularSystem { row, pivot }) => {
                let dependent = dependent_rows(c);
                return Err(if dependent.is_empty() {
                    Error::SingularSystem { row, pivot }
                } else {
                    Error::RankDeficientConstraints { rows: dependent }
                });
            }
            Err(e) => return Err(e),
        };
        Ok(Self { n, k, lu })
    }

    pub fn n_unknowns(&self) -> usize {
        self.n
    }

    pub fn n_constraints(&self) -> usize {
        self.k
    }

    /// Returns `(w, λ)` for the right-hand side `(r, 0)`.
    pub fn solve(&self, r: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        if r.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has length {}, expected {}",
                r.len(),
                self.n
            )));
        }
        let mut rhs = r.to_vec();
        rhs.resize(self.n + self.k, T::zero());
        let mut sol = self.lu.solve(&rhs)?;
        let lambda = sol.split_off(self.n);
        Ok((sol, lambda))
    }
}

/// Solves the saddle system once; `C` may have zero rows.
pub fn saddle_solve<T: Scalar>(
    a: &SparseMatrix<T>,
    c: &SparseMatrix<T>,
    r: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    SaddleFactorization::new(a, c)?.solve(r)
}

/// Rows of `C` that are linear combinations of earlier rows (relative tolerance 1e-10
/// on the Gram-Schmidt residual).
pub fn dependent_rows<T: Scalar>(c: &SparseMatrix<T>) -> Vec<usize> {
    let k = c.n_rows();
    let ct = c.transpose();
    // dense Gram matrix restricted to the rows that interact
    let mut gram = vec![vec![T::zero(); k]; k];
    for i in 0..k {
        let (cols, vals) = c.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let (rows, cv) = ct.row(j);
            for (&r, &w) in rows.iter().zip(cv) {
                gram[i][r] += v * w;
            }
        }
    }
    // Cholesky in row order, skipping rows with vanishing residual
    let tol = lit::<T>(1e-10);
    let mut factor: Vec<Vec<T>> = vec![Vec::new(); k];
    let mut kept: Vec<usize> = Vec::new();
    let mut dependent = Vec::new();
    for i in 0..k {
        let mut row = vec![T::zero(); kept.len()];
        for (a, &p) in kept.iter().enumerate() {
            let s: T = (0..a).map(|b| row[b] * factor[p][b]).sum();
            row[a] = (gram[i][p] - s) / factor[p][a];
        }
        let d = gram[i][i] - row.iter().map(|&v| v * v).sum::<T>();
        if gram[i][i] == T::zero() || d <= tol * gram[i][i] {
            dependent.push(i);
            continue;
        }
        row.push(d.sqrt());
        factor[i] = row;
        kept.push(i);
    }
    dependent
}

/// `‖C w‖∞ / max(‖w‖∞, tiny)`.
pub fn constraint_residual<T: Scalar>(c: &SparseMatrix<T>, w: &[T]) -> T {
    norm_inf(&c.mul_vec(w)) / norm_inf(w).max(T::min_positive_value())
}
