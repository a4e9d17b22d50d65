//! Exact L² projections between nested P1 spaces.

use super::assembly::assemble_mass;
use super::field::element_points;
use super::norms::ExactSolution;
use super::{DofMap, QuadratureRule};
use crate::error::{Error, Result};
use crate::mesh::{barycentric, Hierarchy};
use crate::scalar::{lit, Scalar};
use crate::sparse_linalg::{lu_solve, SparseMatrix};

/// Linear map from fine nodal values to the coefficients of `P_K v` in the local
/// basis of the coarse element `K`, as `(fine vertex, [w₀, w₁, w₂])` pairs.
pub fn element_projection_weights<T: Scalar>(
    hier: &Hierarchy<T>,
    k: usize,
) -> Result<Vec<(usize, [T; 3])>> {
    if k >= hier.coarse.num_elements() {
        return Err(Error::NotInHierarchy(k));
    }
    let coarse_tri = hier.coarse.element_points(k);
    let mut rhs: std::collections::BTreeMap<usize, [T; 3]> = std::collections::BTreeMap::new();
    let twelfth = lit::<T>(1.0 / 12.0);
    for &t in hier.children(k) {
        let el = hier.fine.element(t);
        let lam = el.map(|u| barycentric(&coarse_tri, hier.fine.vertex(u)));
        let s = hier.fine.area(t) * twelfth;
        for (a, &u) in el.iter().enumerate() {
            let entry = rhs.entry(u).or_insert([T::zero(); 3]);
            for i in 0..3 {
                // ∫_T φ_u λ_i = |T|/12 (λ_i(u) + Σ_w λ_i(w))
                let total = lam[0][i] + lam[1][i] + lam[2][i];
                entry[i] += s * (lam[a][i] + total);
            }
        }
    }
    // inverse of the element mass matrix: (3/|K|) [[3,-1,-1],[-1,3,-1],[-1,-1,3]]
    let f = lit::<T>(3.0) / hier.coarse.area(k);
    let three = lit::<T>(3.0);
    Ok(rhs
        .into_iter()
        .map(|(u, r)| {
            let w = [
                f * (three * r[0] - r[1] - r[2]),
                f * (three * r[1] - r[0] - r[2]),
                f * (three * r[2] - r[0] - r[1]),
            ];
            (u, w)
        })
        .collect())
}

/// Coefficients of `P_K v` in the local basis of `K`.
pub fn element_l2_projection<T: Scalar>(hier: &Hierarchy<T>, v: &[T], k: usize) -> Result<[T; 3]> {
    if v.len() != hier.fine.num_vertices() {
        return Err(Error::DimensionMismatch("fine nodal vector expected".into()));
    }
    let mut c = [T::zero(); 3];
    for (u, w) in element_projection_weights(hier, k)? {
        for i in 0..3 {
            c[i] += w[i] * v[u];
        }
    }
    Ok(c)
}

/// `R_{a,u} = ∫ ψ_a φ_u` between coarse and fine hat functions.
pub fn coupling_matrix<T: Scalar>(hier: &Hierarchy<T>) -> Result<SparseMatrix<T>> {
    let twelfth = lit::<T>(1.0 / 12.0);
    let mut t = Vec::new();
    for k in 0..hier.coarse.num_elements() {
        let coarse_tri = hier.coarse.element_points(k);
        let cel = hier.coarse.element(k);
        for &f in hier.children(k) {
            let el = hier.fine.element(f);
            let lam = el.map(|u| barycentric(&coarse_tri, hier.fine.vertex(u)));
            let s = hier.fine.area(f) * twelfth;
            for (a, &u) in el.iter().enumerate() {
                for i in 0..3 {
                    let total = lam[0][i] + lam[1][i] + lam[2][i];
                    t.push((cel[i], u, s * (lam[a][i] + total)));
                }
            }
        }
    }
    SparseMatrix::from_triplets(hier.coarse.num_vertices(), hier.fine.num_vertices(), t)
}

fn solve_mass<T: Scalar>(hier: &Hierarchy<T>, rhs: Vec<T>, constrained: bool) -> Result<Vec<T>> {
    let mass = assemble_mass(&hier.coarse)?;
    if constrained {
        let dofs = DofMap::interior(&hier.coarse);
        let m = mass.submatrix(dofs.vertices(), dofs.vertices());
        Ok(dofs.extend(&lu_solve(&m, &dofs.restrict(&rhs))?))
    } else {
        lu_solve(&mass, &rhs)
    }
}

/// Coarse L²-best approximation of a fine function; `constrained` keeps boundary
/// values at zero.
pub fn l2_best_approx<T: Scalar>(hier: &Hierarchy<T>, fine: &[T], constrained: bool) -> Result<Vec<T>> {
    if fine.len() != hier.fine.num_vertices() {
        return Err(Error::DimensionMismatch("fine nodal vector expected".into()));
    }
    let rhs = coupling_matrix(hier)?.mul_vec(fine);
    solve_mass(hier, rhs, constrained)
}

/// Coarse L²-best approximation of a closed-form function, integrated on the fine mesh.
pub fn l2_best_approx_exact<T: Scalar>(
    hier: &Hierarchy<T>,
    exact: &ExactSolution<T>,
    rule: &QuadratureRule<T>,
    split: bool,
    constrained: bool,
) -> Result<Vec<T>> {
    let mut rhs = vec![T::zero(); hier.coarse.num_vertices()];
    for k in 0..hier.coarse.num_elements() {
        let coarse_tri = hier.coarse.element_points(k);
        let cel = hier.coarse.element(k);
        for &f in hier.children(k) {
            let tri = hier.fine.element_points(f);
            for q in element_points(exact.geom.as_ref(), &tri, rule, split) {
                let lam = barycentric(&coarse_tri, q.x);
                let u = (exact.value)(q.x, q.side);
                for i in 0..3 {
                    rhs[cel[i]] += q.weight * u * lam[i];
                }
            }
        }
    }
    solve_mass(hier, rhs, constrained)
}
