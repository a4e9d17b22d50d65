//! Oswald-type quasi-interpolation `I_H v = Σ_a m^a(v) ψ^a` and its kernel constraints.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{element_projection_weights, DofMap};
use crate::mesh::Hierarchy;
use crate::scalar::{from_usize, Scalar};
use crate::sparse_linalg::SparseMatrix;

/// The weights `m^a` of a hierarchy as a sparse matrix over fine nodal values.
#[derive(Clone, Debug)]
pub struct InterpolationOperator<'h, T> {
    hier: &'h Hierarchy<T>,
    coarse_dofs: DofMap,
    /// Number of coarse elements touching each coarse vertex.
    sharp: Vec<usize>,
    /// Rows indexed by coarse interior dof, columns by fine vertex.
    matrix: SparseMatrix<T>,
}

/// Constraint rows of a patch problem.
#[derive(Clone, Debug)]
pub struct PatchConstraints<T> {
    /// Rows: functionals `m^a`; columns: the patch's fine unknowns.
    pub matrix: SparseMatrix<T>,
    /// Coarse vertex of each row.
    pub vertices: Vec<usize>,
    /// Coarse vertices whose functional vanished on the patch unknowns.
    pub dropped: Vec<usize>,
}

/// Summary counts used in logs and reports.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConstraintStats {
    pub rows: usize,
    pub columns: usize,
    pub dropped: usize,
}

impl<'h, T: Scalar> InterpolationOperator<'h, T> {
    pub fn new(hier: &'h Hierarchy<T>) -> Result<Self> {
        let coarse = &hier.coarse;
        let coarse_dofs = DofMap::interior(coarse);
        let sharp: Vec<usize> = (0..coarse.num_vertices()).map(|v| coarse.vertex_elements(v).len()).collect();
        let mut t = Vec::new();
        for k in 0..coarse.num_elements() {
            let el = coarse.element(k);
            let weights = element_projection_weights(hier, k)?;
            for (local, &a) in el.iter().enumerate() {
                let Some(row) = coarse_dofs.dof(a) else { continue };
                let scale = T::one() / from_usize::<T>(sharp[a]);
                for (u, w) in &weights {
                    t.push((row, *u, w[local] * scale));
                }
            }
        }
        let matrix = SparseMatrix::from_triplets(coarse_dofs.len(), hier.fine.num_vertices(), t)?;
        Ok(Self { hier, coarse_dofs, sharp, matrix })
    }

    pub fn hierarchy(&self) -> &'h Hierarchy<T> {
        self.hier
    }

    pub fn coarse_dofs(&self) -> &DofMap {
        &self.coarse_dofs
    }

    /// ♯a, the number of coarse elements containing `a`.
    pub fn sharp(&self, a: usize) -> usize {
        self.sharp[a]
    }

    /// Ĩ: coarse interior dofs × fine vertices.
    pub fn interpolation_matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    /// `m^a(v)` for an interior coarse vertex `a`.
    pub fn vertex_weight(&self, a: usize, v: &[T]) -> Result<T> {
        let row = self.coarse_dofs.dof(a).ok_or_else(|| {
            Error::Precondition(format!("coarse vertex {a} is on the boundary and carries no weight"))
        })?;
        if v.len() != self.hier.fine.num_vertices() {
            return Err(Error::DimensionMismatch("fine nodal vector expected".into()));
        }
        let (cols, vals) = self.matrix.row(row);
        Ok(cols.iter().zip(vals).map(|(&u, &w)| w * v[u]).sum())
    }

    /// Nodal values of `I_H v` on all coarse vertices (zero on the boundary).
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        self.coarse_dofs.extend(&self.matrix.mul_vec(v))
    }

    /// Fine vertices strictly inside the union of the coarse elements `patch` and off ∂Ω.
    pub fn patch_fine_dofs(&self, patch: &[usize]) -> DofMap {
        let fine = &self.hier.fine;
        let mut in_patch = vec![false; self.hier.coarse.num_elements()];
        for &k in patch {
            in_patch[k] = true;
        }
        let mut candidates: Vec<usize> = patch
            .iter()
            .flat_map(|&k| self.hier.children(k).iter().flat_map(|&t| fine.element(t)))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let vertices = candidates
            .into_iter()
            .filter(|&u| {
                !fine.is_boundary(u)
                    && fine.vertex_elements(u).iter().all(|&t| in_patch[self.hier.parent(t)])
            })
            .collect();
        DofMap::from_vertices(fine.num_vertices(), vertices)
    }

    /// Functionals `m^a` for every interior coarse vertex whose support meets the patch,
    /// restricted to the given fine unknowns.
    pub fn constraint_matrix(&self, patch: &[usize], fine_dofs: &DofMap) -> Result<PatchConstraints<T>> {
        if patch.is_empty() {
            return Err(Error::InvalidArgument("constraint matrix of an empty patch".into()));
        }
        let coarse = &self.hier.coarse;
        let mut vertices: Vec<usize> = patch
            .iter()
            .flat_map(|&k| coarse.element(k))
            .filter(|&a| !coarse.is_boundary(a))
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        let mut t = Vec::new();
        for &a in &vertices {
            let row = self.coarse_dofs.dof(a).expect("interior vertex has a dof");
            let (cols, vals) = self.matrix.row(row);
            let before = t.len();
            for (&u, &w) in cols.iter().zip(vals) {
                if let Some(j) = fine_dofs.dof(u) {
                    if w != T::zero() {
                        t.push((kept.len(), j, w));
                    }
                }
            }
            if t.len() == before {
                dropped.push(a);
            } else {
                kept.push(a);
            }
        }
        if !dropped.is_empty() {
            log::debug!("dropped {} vanishing constraint rows: {:?}", dropped.len(), dropped);
        }
        let matrix = SparseMatrix::from_triplets(kept.len(), fine_dofs.len(), t)?;
        Ok(PatchConstraints { matrix, vertices: kept, dropped })
    }
}

impl<T: Scalar> PatchConstraints<T> {
    pub fn stats(&self) -> ConstraintStats {
        ConstraintStats {
            rows: self.matrix.n_rows(),
            columns: self.matrix.n_cols(),
            dropped: self.dropped.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{element_patch, MeshPattern};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hier() -> Hierarchy<f64> {
        Hierarchy::new(2, 4, MeshPattern::CrissCross).unwrap()
    }

    #[test]
    fn reproduces_coarse_hats() {
        let h = hier();
        let op = InterpolationOperator::new(&h).unwrap();
        for &a in op.coarse_dofs().vertices() {
            let hat: Vec<(usize, f64)> = h.inject_hat(a);
            let mut v = vec![0.0; h.fine.num_vertices()];
            for (u, x) in hat {
                v[u] = x;
            }
            for &b in op.coarse_dofs().vertices() {
                let m = op.vertex_weight(b, &v).unwrap();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((m - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn constants_and_boundary() {
        let h = hier();
        let op = InterpolationOperator::new(&h).unwrap();
        let five = vec![5.0; h.fine.num_vertices()];
        for &a in op.coarse_dofs().vertices() {
            assert!((op.vertex_weight(a, &five).unwrap() - 5.0).abs() < 1e-13);
        }
        assert!(op.vertex_weight(0, &five).is_err());
    }

    #[test]
    fn idempotent() {
        let h = hier();
        let op = InterpolationOperator::new(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..h.fine.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let once = op.apply(&v);
        let twice = op.apply(&h.inject(&once));
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn rows_are_local() {
        let h = hier();
        let op = InterpolationOperator::new(&h).unwrap();
        for (row, &a) in op.coarse_dofs().vertices().iter().enumerate() {
            let support: Vec<usize> = h.coarse.vertex_elements(a).to_vec();
            for &u in op.interpolation_matrix().row(row).0 {
                assert!(h.fine.vertex_elements(u).iter().any(|&t| support.contains(&h.parent(t))));
            }
        }
    }

    #[test]
    fn whole_domain_constraints() {
        let h = hier();
        let op = InterpolationOperator::new(&h).unwrap();
        let all: Vec<usize> = (0..h.coarse.num_elements()).collect();
        let dofs = op.patch_fine_dofs(&all);
        assert_eq!(dofs.len(), h.fine.interior_vertices().len());
        let c = op.constraint_matrix(&all, &dofs).unwrap();
        assert_eq!(c.vertices, h.coarse.interior_vertices());
        assert!(c.dropped.is_empty());
        assert!(op.constraint_matrix(&[], &dofs).is_err());
    }

    #[test]
    fn single_element_patch_counts() {
        let h = hier();
        let op = InterpolationOperator::new(&h).unwrap();
        let k = h.coarse.locate([0.3, 0.3]);
        let patch = element_patch(&h.coarse, &[k], 1).unwrap();
        let dofs = op.patch_fine_dofs(&patch);
        let c = op.constraint_matrix(&patch, &dofs).unwrap();
        let mut expected: Vec<usize> = patch
            .iter()
            .flat_map(|&e| h.coarse.element(e))
            .filter(|&a| !h.coarse.is_boundary(a))
            .collect();
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(c.vertices.len() + c.dropped.len(), expected.len());
    }
}
