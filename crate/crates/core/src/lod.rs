//! Multiscale Galerkin system on `(id - Q_m) V_H`, the coarse FEM baseline and error reports.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::correctors::{CorrectorSet, FineProblem};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_load, assemble_sigma_stiffness, error_norms_exact, fe_norms, l2_best_approx,
    l2_best_approx_exact, Coefficient, DofMap, ExactSolution, PiecewiseField, QuadratureRule,
};
use crate::mesh::{Hierarchy, Triangulation};
use crate::scalar::{to_f64, Scalar};
use crate::sparse_linalg::{LuFactorization, SparseMatrix};

/// Sparse fine vectors `(id - Q_m) ψ_j`, one per coarse interior dof.
pub fn composite_basis<T: Scalar>(hier: &Hierarchy<T>, set: &CorrectorSet<T>, dofs: &DofMap) -> Vec<Vec<(usize, T)>> {
    dofs.vertices()
        .par_iter()
        .enumerate()
        .map(|(j, &a)| {
            let mut acc: std::collections::BTreeMap<usize, T> = hier.inject_hat(a).into_iter().collect();
            if let Some(q) = set.correctors.get(j) {
                for &(u, x) in q {
                    *acc.entry(u).or_insert(T::zero()) -= x;
                }
            }
            acc.into_iter().filter(|&(_, x)| x != T::zero()).collect()
        })
        .collect()
}

/// Galerkin matrix `S_ij = a((id-Q_m)ψ_j, (id-Q_m)ψ_i)` and load `F_i = (f, (id-Q_m)ψ_i)`.
pub fn assemble_lod_system<T: Scalar>(
    fp: &FineProblem<'_, T>,
    set: &CorrectorSet<T>,
    f: &PiecewiseField<T>,
    rule: &QuadratureRule<T>,
    split: bool,
) -> Result<(SparseMatrix<T>, Vec<T>)> {
    let dofs = fp.op.coarse_dofs();
    if set.len() != dofs.len() || set.n_fine != fp.hier.fine.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "{} correctors on {} fine vertices for {} coarse dofs",
            set.len(),
            set.n_fine,
            dofs.len()
        )));
    }
    let basis = composite_basis(fp.hier, set, dofs);
    let n = basis.len();
    let nf = fp.hier.fine.num_vertices();
    let mut index: Vec<Vec<(usize, T)>> = vec![Vec::new(); nf];
    for (i, z) in basis.iter().enumerate() {
        for &(u, x) in z {
            index[u].push((i, x));
        }
    }
    let a = &fp.stiffness;
    let columns: Vec<Vec<(usize, usize, T)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut y: std::collections::BTreeMap<usize, T> = Default::default();
            for &(u, x) in &basis[j] {
                let (cols, vals) = a.row(u);
                for (&c, &v) in cols.iter().zip(vals) {
                    *y.entry(c).or_insert(T::zero()) += v * x;
                }
            }
            let mut col = vec![T::zero(); n];
            let mut touched = Vec::new();
            for (&u, &yu) in &y {
                for &(i, x) in &index[u] {
                    if col[i] == T::zero() {
                        touched.push(i);
                    }
                    col[i] += x * yu;
                }
            }
            touched.sort_unstable();
            touched.dedup();
            touched.into_iter().map(|i| (i, j, col[i])).collect()
        })
        .collect();
    let mut s = SparseMatrix::from_triplets(n, n, columns.into_iter().flatten().collect())?;
    s.mark_symmetric().ok();
    let load = assemble_load(&fp.hier.fine, f, rule, split);
    let rhs = basis.iter().map(|z| z.iter().map(|&(u, x)| load[u] * x).sum()).collect();
    Ok((s, rhs))
}

/// LOD approximation: macroscopic part `u_{H,m}` and the full fine solution.
#[derive(Clone, Debug, Serialize)]
pub struct LodSolution<T> {
    pub m: usize,
    pub coarse_level: u32,
    pub fine_level: u32,
    /// Interior coarse coefficients.
    pub coefficients: Vec<T>,
    /// `u_{H,m}` on all coarse vertices.
    pub coarse: Vec<T>,
    /// `(id - Q_m) u_{H,m}` on all fine vertices.
    pub fine: Vec<T>,
    pub solve_s: f64,
}

pub fn solve_lod<T: Scalar>(
    hier: &Hierarchy<T>,
    s: &SparseMatrix<T>,
    rhs: &[T],
    set: &CorrectorSet<T>,
) -> Result<LodSolution<T>> {
    let dofs = DofMap::interior(&hier.coarse);
    if s.n_rows() != dofs.len() || rhs.len() != dofs.len() {
        return Err(Error::DimensionMismatch("LOD system does not match the coarse dofs".into()));
    }
    let start = Instant::now();
    let coefficients = LuFactorization::new(s)?.solve(rhs)?;
    let solve_s = start.elapsed().as_secs_f64();
    let coarse = dofs.extend(&coefficients);
    let mut fine = hier.inject(&coarse);
    for (u, q) in fine.iter_mut().zip(set.apply(&coefficients)) {
        *u -= q;
    }
    Ok(LodSolution {
        m: set.m,
        coarse_level: hier.coarse.level(),
        fine_level: hier.fine.level(),
        coefficients,
        coarse,
        fine,
        solve_s,
    })
}

/// Standard P1 Galerkin solution on `mesh` with homogeneous Dirichlet data, on all vertices.
pub fn fem_baseline<T: Scalar>(
    mesh: &Triangulation<T>,
    sigma: &Coefficient<T>,
    f: &PiecewiseField<T>,
    rule: &QuadratureRule<T>,
    split: bool,
) -> Result<Vec<T>> {
    let dofs = DofMap::interior(mesh);
    let a = assemble_sigma_stiffness(mesh, sigma, rule, split)?;
    let a = a.submatrix(dofs.vertices(), dofs.vertices());
    let b = dofs.restrict(&assemble_load(mesh, f, rule, split));
    Ok(dofs.extend(&LuFactorization::new(&a)?.solve(&b)?))
}

/// What errors are measured against.
pub enum Reference<'a, T> {
    Exact { solution: &'a ExactSolution<T>, rule: &'a QuadratureRule<T>, split: bool },
    /// Fine-mesh nodal values.
    Fine(&'a [T]),
}

/// Errors of one LOD run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorRecord {
    /// `|u - (id-Q_m)u_{H,m}|_1`
    pub h1_lod: f64,
    pub energy_lod: f64,
    /// `‖u - u_{H,m}‖`
    pub l2_macro: f64,
    /// `‖u - u_H^FEM‖`
    pub l2_fem: f64,
    pub h1_fem: f64,
    /// `‖u - Π_H u‖`
    pub l2_bestapprox: f64,
}

/// Coarse L²-best approximation (zero boundary values) of the reference.
pub fn best_approximation<T: Scalar>(hier: &Hierarchy<T>, reference: &Reference<'_, T>) -> Result<Vec<T>> {
    match reference {
        Reference::Exact { solution, rule, split } => l2_best_approx_exact(hier, solution, rule, *split, true),
        Reference::Fine(u) => l2_best_approx(hier, u, true),
    }
}

/// Error norms; coarse functions are injected into the fine mesh where they are exact.
pub fn error_report<T: Scalar>(
    hier: &Hierarchy<T>,
    solution: &LodSolution<T>,
    baseline: &[T],
    best_approx: &[T],
    reference: &Reference<'_, T>,
    sigma: &Coefficient<T>,
) -> ErrorRecord {
    let fine = &hier.fine;
    let norms = |v: &[T]| match reference {
        Reference::Exact { solution, rule, split } => {
            error_norms_exact(fine, v, solution, Some(sigma), rule, *split)
        }
        Reference::Fine(u) => {
            let diff: Vec<T> = u.iter().zip(v).map(|(a, b)| *a - *b).collect();
            let abs: Vec<T> = (0..fine.num_elements())
                .map(|e| sigma.eval(fine.centroid(e)).abs() * fine.area(e))
                .collect();
            fe_norms(fine, &diff, Some(&abs))
        }
    };
    let lod = norms(&solution.fine);
    let macro_ = norms(&hier.inject(&solution.coarse));
    let fem = norms(&hier.inject(baseline));
    let best = norms(&hier.inject(best_approx));
    ErrorRecord {
        h1_lod: to_f64(lod.h1_semi),
        energy_lod: to_f64(lod.sigma_energy),
        l2_macro: to_f64(macro_.l2),
        l2_fem: to_f64(fem.l2),
        h1_fem: to_f64(fem.h1_semi),
        l2_bestapprox: to_f64(best.l2),
    }
}
