use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Scalar};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
    symmetric: bool,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, T)>,
    ) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|t| t.0 >= n_rows || t.1 >= n_cols) {
            return Err(Error::DimensionMismatch(format!(
                "entry ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
            )));
        }
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((i, j, mut v)) = iter.next() {
            while let Some(&(i2, j2, v2)) = iter.peek() {
                if (i2, j2) != (i, j) {
                    break;
                }
                v += v2;
                iter.next();
            }
            if v != T::zero() {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values, symmetric: false })
    }

    /// Builds a matrix from raw CSR arrays; columns must be strictly increasing per row.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        let ok = row_ptr.len() == n_rows + 1
            && col_idx.len() == values.len()
            && row_ptr[n_rows] == col_idx.len()
            && (0..n_rows).all(|i| {
                let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                cols.windows(2).all(|w| w[0] < w[1]) && cols.iter().all(|&j| j < n_cols)
            });
        if !ok {
            return Err(Error::DimensionMismatch("malformed CSR arrays".into()));
        }
        let mut m = Self { n_rows, n_cols, row_ptr, col_idx, values, symmetric: false };
        m.drop_zeros();
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
            symmetric: true,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            symmetric: n_rows == n_cols,
        }
    }

    fn drop_zeros(&mut self) {
        let mut row_ptr = vec![0; self.n_rows + 1];
        let mut k = 0;
        for i in 0..self.n_rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.values[p] != T::zero() {
                    self.col_idx[k] = self.col_idx[p];
                    self.values[k] = self.values[p];
                    k += 1;
                }
            }
            row_ptr[i + 1] = k;
        }
        self.col_idx.truncate(k);
        self.values.truncate(k);
        self.row_ptr = row_ptr;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(T::zero(), |p| vals[p])
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Sets the symmetric flag after spot-checking 100 random stored entries against
    /// their transposes.
    pub fn mark_symmetric(&mut self) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(Error::DimensionMismatch("non-square matrix cannot be symmetric".into()));
        }
        let tol = self.max_abs() * crate::scalar::lit(1e-12);
        if self.nnz() > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.nnz() as u64);
            for _ in 0..100 {
                let p = rng.gen_range(0..self.nnz());
                let i = self.row_ptr.partition_point(|&s| s <= p) - 1;
                let j = self.col_idx[p];
                if (self.values[p] - self.get(j, i)).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        self.symmetric = true;
        Ok(())
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_cols, "vector length must match column count");
        (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `Aᵀ x`.
    pub fn mul_vec_transposed(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_rows, "vector length must match row count");
        let mut y = vec![T::zero(); self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[T], x: &[T]) -> T {
        self.mul_vec(x).iter().zip(y).map(|(&a, &b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr: counts,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    /// Rows `rows` and columns `cols` of the matrix, renumbered in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n_cols];
        for (k, &j) in cols.iter().enumerate() {
            map[j] = k;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for &i in rows {
            scratch.clear();
            let (c, v) = self.row(i);
            scratch.extend(
                c.iter().zip(v).filter(|(&j, _)| map[j] != usize::MAX).map(|(&j, &x)| (map[j], x)),
            );
            scratch.sort_unstable_by_key(|e| e.0);
            for &(j, x) in &scratch {
                col_idx.push(j);
                values.push(x);
            }
            row_ptr.push(col_idx.len());
        }
        let symmetric = self.symmetric && rows == cols;
        Self { n_rows: rows.len(), n_cols: cols.len(), row_ptr, col_idx, values, symmetric }
    }

    /// Triplet view of all stored entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n_cols]; self.n_rows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Coordinate text dump, one `i j value` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {:e}", to_f64(v))?;
        }
        Ok(())
    }
}

pub(crate) fn norm2<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub(crate) fn norm_inf<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix<f64> {
        SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 2, 1.0), (1, 1, 0.5), (2, 0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let a = sample();
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(1, 1), 2.5);
        assert_eq!(a.get(2, 0), 0.0);
    }

    #[test]
    fn rows_strictly_increasing() {
        let a = sample();
        for i in 0..3 {
            assert!(a.row(i).0.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(SparseMatrix::<f64>::from_csr(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn matvec_and_transpose() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 2, 1.0), (1, 0, 3.0), (1, 1, -2.0)]).unwrap();
        assert_eq!(a.mul_vec(&[1.0, 1.0, 2.0]), vec![2.0, 1.0]);
        let t = a.transpose();
        assert_eq!(t.mul_vec(&[1.0, 1.0]), a.mul_vec_transposed(&[1.0, 1.0]));
        assert_eq!(t.get(2, 0), 1.0);
    }

    #[test]
    fn symmetry_check() {
        let mut a = sample();
        assert!(a.mark_symmetric().is_ok());
        let mut b = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]).unwrap();
        assert!(b.mark_symmetric().is_err());
    }

    #[test]
    fn submatrix_reorders() {
        let a = sample();
        let s = a.submatrix(&[1, 0], &[1, 0]);
        assert_eq!(s.to_dense(), vec![vec![2.5, -1.0], vec![-1.0, 2.0]]);
    }

    #[test]
    fn coo_dump() {
        let mut buf = Vec::new();
        SparseMatrix::<f64>::identity(2).write_coo(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 0 1e0\n1 1 1e0\n");
    }
}
