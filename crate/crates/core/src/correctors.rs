//! Element correctors `Q_K` and `Q_{K,m}` on (symmetric) patches.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{
    p1_gradients, sigma_integrals, stiffness_from_integrals, Coefficient, DofMap, QuadratureRule,
};
use crate::mesh::{element_patch, symmetric_patch, Hierarchy, InterfaceGeometry, SymmetricPatch};
use crate::quasi_interp::{ConstraintStats, InterpolationOperator};
use crate::scalar::{to_f64, Scalar};
use crate::sparse_linalg::{SaddleFactorization, SparseMatrix};
use crate::tcoercivity::SymmetrizationMap;

/// Largest fine level for which the global (ideal) corrector problems are solved.
pub const IDEAL_FINE_LEVEL_CAP: u32 = 6;

/// Fine-scale data shared by all corrector problems of one hierarchy and coefficient.
#[derive(Debug)]
pub struct FineProblem<'h, T> {
    pub hier: &'h Hierarchy<T>,
    pub op: InterpolationOperator<'h, T>,
    /// `∫_t σ` for every fine element.
    pub sigma_integrals: Vec<T>,
    /// Fine σ-stiffness on all fine vertices.
    pub stiffness: SparseMatrix<T>,
    pub geom: Option<InterfaceGeometry<T>>,
    pub sym: Option<SymmetrizationMap<T>>,
}

impl<'h, T: Scalar> FineProblem<'h, T> {
    /// Assembles the fine stiffness; a symmetrization is attached automatically for a
    /// flat interface with Ω₋ on top.
    pub fn new(
        hier: &'h Hierarchy<T>,
        sigma: &Coefficient<T>,
        rule: &QuadratureRule<T>,
        split: bool,
    ) -> Result<Self> {
        let integrals = sigma_integrals(&hier.fine, sigma, rule, split);
        let stiffness = stiffness_from_integrals(&hier.fine, &integrals)?;
        let geom = sigma.geometry().cloned();
        let sym = geom.as_ref().and_then(|g| SymmetrizationMap::new(g).ok());
        Ok(Self { hier, op: InterpolationOperator::new(hier)?, sigma_integrals: integrals, stiffness, geom, sym })
    }

    pub fn with_symmetrization(mut self, sym: Option<SymmetrizationMap<T>>) -> Self {
        self.sym = sym;
        self
    }

    /// P^m(K), or N^m(K) when the coefficient has no interface.
    pub fn patch(&self, k: usize, m: usize) -> Result<SymmetricPatch> {
        match &self.geom {
            Some(g) => symmetric_patch(&self.hier.coarse, k, m, g, self.sym.as_ref()),
            None => Ok(SymmetricPatch {
                elements: element_patch(&self.hier.coarse, &[k], m)?,
                touches_interface: false,
                fallback: false,
            }),
        }
    }

    /// Right-hand side `a_K(v, φ_u)` on all fine vertices for `v` linear on `K` with
    /// nodal values `v_local` at the vertices of `K`.
    pub fn element_rhs(&self, k: usize, v_local: [T; 3]) -> Vec<T> {
        let (gk, _) = p1_gradients(&self.hier.coarse.element_points(k));
        let g = [
            (0..3).map(|i| v_local[i] * gk[i][0]).sum::<T>(),
            (0..3).map(|i| v_local[i] * gk[i][1]).sum::<T>(),
        ];
        let mut r = vec![T::zero(); self.hier.fine.num_vertices()];
        for &t in self.hier.children(k) {
            let (gt, _) = p1_gradients(&self.hier.fine.element_points(t));
            let s = self.sigma_integrals[t];
            for (i, &u) in self.hier.fine.element(t).iter().enumerate() {
                r[u] += s * (g[0] * gt[i][0] + g[1] * gt[i][1]);
            }
        }
        r
    }
}

/// Factored corrector problem on one patch. Without a scale gap the kernel is trivial
/// and no system is formed.
pub struct PatchSolver<T> {
    pub dofs: DofMap,
    pub constraints: ConstraintStats,
    saddle: Option<SaddleFactorization<T>>,
}

impl<T: Scalar> PatchSolver<T> {
    pub fn new(fp: &FineProblem<'_, T>, patch: &[usize]) -> Result<Self> {
        let dofs = fp.op.patch_fine_dofs(patch);
        let c = fp.op.constraint_matrix(patch, &dofs)?;
        let saddle = if fp.hier.fine.level() == fp.hier.coarse.level() {
            None
        } else {
            let a = fp.stiffness.submatrix(dofs.vertices(), dofs.vertices());
            Some(SaddleFactorization::new(&a, &c.matrix)?)
        };
        Ok(Self { dofs, constraints: c.stats(), saddle })
    }

    /// Solves with a full fine right-hand side and returns the sparse solution.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<(usize, T)>> {
        let Some(saddle) = &self.saddle else { return Ok(Vec::new()) };
        let (w, _) = saddle.solve(&self.dofs.restrict(rhs))?;
        Ok(self.dofs.vertices().iter().copied().zip(w).collect())
    }
}

fn densify<T: Scalar>(n: usize, sparse: &[(usize, T)]) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    for &(i, x) in sparse {
        v[i] = x;
    }
    v
}

fn local_values<T: Scalar>(hier: &Hierarchy<T>, k: usize, v_h: &[T]) -> Result<[T; 3]> {
    if k >= hier.coarse.num_elements() {
        return Err(Error::NotInHierarchy(k));
    }
    if v_h.len() != hier.coarse.num_vertices() {
        return Err(Error::DimensionMismatch("coarse nodal vector expected".into()));
    }
    Ok(hier.coarse.element(k).map(|a| v_h[a]))
}

/// Ideal corrector `Q_K v_H` from the global constrained problem.
pub fn ideal_element_corrector<T: Scalar>(fp: &FineProblem<'_, T>, k: usize, v_h: &[T]) -> Result<Vec<T>> {
    if fp.hier.fine.level() > IDEAL_FINE_LEVEL_CAP {
        return Err(Error::Precondition(format!(
            "ideal correctors are limited to fine level {IDEAL_FINE_LEVEL_CAP}"
        )));
    }
    let local = local_values(fp.hier, k, v_h)?;
    let all: Vec<usize> = (0..fp.hier.coarse.num_elements()).collect();
    let solver = PatchSolver::new(fp, &all)?;
    let w = solver.solve(&fp.element_rhs(k, local))?;
    Ok(densify(fp.hier.fine.num_vertices(), &w))
}

/// Localized corrector `Q_{K,m} v_H` on the symmetric patch P^m(K).
pub fn localized_element_corrector<T: Scalar>(
    fp: &FineProblem<'_, T>,
    k: usize,
    m: usize,
    v_h: &[T],
) -> Result<(Vec<T>, SymmetricPatch)> {
    let local = local_values(fp.hier, k, v_h)?;
    let patch = fp.patch(k, m)?;
    let solver = PatchSolver::new(fp, &patch.elements)?;
    let w = solver.solve(&fp.element_rhs(k, local))?;
    Ok((densify(fp.hier.fine.num_vertices(), &w), patch))
}

/// Patch bookkeeping for one coarse element.
#[derive(Clone, Debug, Serialize)]
pub struct PatchInfo {
    pub element: usize,
    pub patch_elements: usize,
    pub touches_interface: bool,
    pub fallback: bool,
    pub fine_unknowns: usize,
    pub constraints: ConstraintStats,
}

/// Correctors `q_j = Q_m ψ_j` of all interior coarse hat functions.
#[derive(Clone, Debug)]
pub struct CorrectorSet<T> {
    pub m: usize,
    /// Sparse fine nodal vectors, indexed like the coarse interior dofs.
    pub correctors: Vec<Vec<(usize, T)>>,
    pub patches: Vec<PatchInfo>,
    pub n_fine: usize,
}

/// Builds `Q_m ψ_j = Σ_{K ⊂ supp ψ_j} Q_{K,m} ψ_j` for every interior coarse vertex `j`.
pub fn corrector_basis<T: Scalar>(fp: &FineProblem<'_, T>, m: usize) -> Result<CorrectorSet<T>> {
    let coarse = &fp.hier.coarse;
    let dofs = fp.op.coarse_dofs();
    type Local<T> = (PatchInfo, Vec<(usize, Vec<(usize, T)>)>);
    let per_element: Vec<Result<Local<T>>> = (0..coarse.num_elements())
        .into_par_iter()
        .map(|k| {
            let run = || -> Result<Local<T>> {
                let patch = fp.patch(k, m)?;
                let solver = PatchSolver::new(fp, &patch.elements)?;
                let mut out = Vec::new();
                for (i, &a) in coarse.element(k).iter().enumerate() {
                    let Some(j) = dofs.dof(a) else { continue };
                    let mut local = [T::zero(); 3];
                    local[i] = T::one();
                    out.push((j, solver.solve(&fp.element_rhs(k, local))?));
                }
                let info = PatchInfo {
                    element: k,
                    patch_elements: patch.elements.len(),
                    touches_interface: patch.touches_interface,
                    fallback: patch.fallback,
                    fine_unknowns: solver.dofs.len(),
                    constraints: solver.constraints,
                };
                Ok((info, out))
            };
            run().map_err(|e| Error::Corrector { element: k, source: Box::new(e) })
        })
        .collect();
    let n_fine = fp.hier.fine.num_vertices();
    let mut acc: Vec<std::collections::BTreeMap<usize, T>> = vec![Default::default(); dofs.len()];
    let mut patches = Vec::with_capacity(coarse.num_elements());
    for item in per_element {
        let (info, parts) = item?;
        patches.push(info);
        for (j, w) in parts {
            for (u, x) in w {
                *acc[j].entry(u).or_insert(T::zero()) += x;
            }
        }
    }
    let correctors = acc
        .into_iter()
        .map(|map| map.into_iter().filter(|&(_, x)| x != T::zero()).collect())
        .collect();
    Ok(CorrectorSet { m, correctors, patches, n_fine })
}

impl<T: Scalar> CorrectorSet<T> {
    pub fn len(&self) -> usize {
        self.correctors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.correctors.is_empty()
    }

    /// `Q_m v_H` for coarse interior coefficients `c`.
    pub fn apply(&self, c: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_fine];
        for (q, &cj) in self.correctors.iter().zip(c) {
            if cj == T::zero() {
                continue;
            }
            for &(u, x) in q {
                out[u] += cj * x;
            }
        }
        out
    }

    pub fn fallback_count(&self) -> usize {
        self.patches.iter().filter(|p| p.fallback).count()
    }
}

/// Tail norms of an ideal corrector outside growing patches.
#[derive(Clone, Debug, Serialize)]
pub struct DecayProfile {
    pub element: usize,
    /// `(m, |Q_K v_H|_{1, Ω∖P^m(K)})`.
    pub tails: Vec<(usize, f64)>,
    /// Least-squares slope of `ln(tail)` against `m` over `m ≥ 1`.
    pub fit_slope: f64,
}

impl DecayProfile {
    /// CSV with header `element_id,m,tail_h1,fit_slope`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "element_id,m,tail_h1,fit_slope")?;
        }
        for &(m, t) in &self.tails {
            writeln!(out, "{},{},{:e},{}", self.element, m, t, self.fit_slope)?;
        }
        Ok(())
    }
}

/// Least-squares slope of `ln y` against `x`, ignoring non-positive `y`.
pub fn log_slope(points: &[(usize, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(x, y)| (x as f64, y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// H¹-seminorm of the ideal corrector `Q_K v_H` outside P^m(K) for `m = 0..=m_max`.
pub fn decay_profile<T: Scalar>(
    fp: &FineProblem<'_, T>,
    k: usize,
    v_h: &[T],
    m_max: usize,
) -> Result<DecayProfile> {
    let q = ideal_element_corrector(fp, k, v_h)?;
    let fine = &fp.hier.fine;
    let energy: Vec<T> = (0..fine.num_elements())
        .map(|t| {
            let (g, area) = p1_gradients(&fine.element_points(t));
            let el = fine.element(t);
            let gx: T = (0..3).map(|i| q[el[i]] * g[i][0]).sum();
            let gy: T = (0..3).map(|i| q[el[i]] * g[i][1]).sum();
            area * (gx * gx + gy * gy)
        })
        .collect();
    let mut tails = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let patch = fp.patch(k, m)?;
        let mut inside = vec![false; fp.hier.coarse.num_elements()];
        for &e in &patch.elements {
            inside[e] = true;
        }
        let tail: T = (0..fine.num_elements())
            .filter(|&t| !inside[fp.hier.parent(t)])
            .map(|t| energy[t])
            .sum();
        tails.push((m, to_f64(tail.sqrt())));
    }
    let fit: Vec<(usize, f64)> = tails.iter().copied().filter(|&(m, _)| m >= 1).collect();
    Ok(DecayProfile { element: k, fit_slope: log_slope(&fit), tails })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshPattern;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_problem(h: &Hierarchy<f64>, minus: f64) -> FineProblem<'_, f64> {
        let g = InterfaceGeometry::flat(0.5).unwrap();
        let sigma = Coefficient::piecewise_constant(g, 1.0, minus);
        FineProblem::new(h, &sigma, &QuadratureRule::with_degree(2), false).unwrap()
    }

    #[test]
    fn zero_input_zero_corrector() {
        let h = Hierarchy::new(2, 4, MeshPattern::CrissCross).unwrap();
        let fp = flat_problem(&h, 2.0);
        let zero = vec![0.0; h.coarse.num_vertices()];
        let q = ideal_element_corrector(&fp, 5, &zero).unwrap();
        assert!(q.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn no_scale_gap_means_no_correctors() {
        let h = Hierarchy::new(3, 3, MeshPattern::CrissCross).unwrap();
        let fp = FineProblem::new(&h, &Coefficient::<f64>::constant(1.0), &QuadratureRule::with_degree(2), false).unwrap();
        let set = corrector_basis(&fp, 2).unwrap();
        assert_eq!(set.len(), h.coarse.interior_vertices().len());
        assert!(set.correctors.iter().all(|q| q.is_empty()));
    }

    #[test]
    fn ideal_corrector_satisfies_definition() {
        let h = Hierarchy::new(2, 4, MeshPattern::CrissCross).unwrap();
        let fp = flat_problem(&h, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v_h: Vec<f64> = (0..h.coarse.num_vertices())
            .map(|a| if h.coarse.is_boundary(a) { 0.0 } else { rng.gen_range(-1.0..1.0) })
            .collect();
        let k = h.coarse.locate([0.4, 0.55]);
        let q = ideal_element_corrector(&fp, k, &v_h).unwrap();
        // kernel constraints
        let iq = fp.op.apply(&q);
        assert!(iq.iter().all(|x| x.abs() < 1e-10));
        // a(Q_K v, w) = a_K(v, w) for random w in W
        let all: Vec<usize> = (0..h.coarse.num_elements()).collect();
        let solver = PatchSolver::new(&fp, &all).unwrap();
        let r = fp.element_rhs(k, h.coarse.element(k).map(|a| v_h[a]));
        for _ in 0..20 {
            let z: Vec<f64> = (0..h.fine.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // a random element of W: project a random right-hand side through the saddle solve
            let w = densify(h.fine.num_vertices(), &solver.solve(&z).unwrap());
            let lhs = fp.stiffness.bilinear(&w, &q);
            let rhs: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn whole_domain_patch_equals_ideal() {
        let h = Hierarchy::new(2, 4, MeshPattern::CrissCross).unwrap();
        let fp = flat_problem(&h, 2.0);
        let mut v_h = vec![0.0; h.coarse.num_vertices()];
        let a = h.coarse.vertex_at([0.5, 0.5]).unwrap();
        v_h[a] = 1.0;
        let k = h.coarse.vertex_elements(a)[0];
        let ideal = ideal_element_corrector(&fp, k, &v_h).unwrap();
        let (local, _) = localized_element_corrector(&fp, k, 100, &v_h).unwrap();
        let diff: Vec<f64> = ideal.iter().zip(&local).map(|(a, b)| a - b).collect();
        assert!(crate::fem::fe_norms(&h.fine, &diff, None).h1_semi < 1e-9);
    }

    #[test]
    fn correctors_are_linear() {
        let h = Hierarchy::new(2, 4, MeshPattern::CrissCross).unwrap();
        let fp = flat_problem(&h, 2.0);
        let set = corrector_basis(&fp, 1).unwrap();
        let n = set.len();
        let c1: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let c2: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| 2.0 * a - b).collect();
        let q1 = set.apply(&c1);
        let q2 = set.apply(&c2);
        let qs = set.apply(&sum);
        for i in 0..q1.len() {
            assert!((qs[i] - (2.0 * q1[i] - q2[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn corrector_supports_stay_in_patches() {
        let h = Hierarchy::new(3, 5, MeshPattern::CrissCross).unwrap();
        let fp = flat_problem(&h, 2.0);
        let m = 1;
        let set = corrector_basis(&fp, m).unwrap();
        for (j, &a) in fp.op.coarse_dofs().vertices().iter().enumerate() {
            let mut allowed = vec![false; h.coarse.num_elements()];
            for &k in h.coarse.vertex_elements(a) {
                for e in fp.patch(k, m).unwrap().elements {
                    allowed[e] = true;
                }
            }
            for &(u, _) in &set.correctors[j] {
                assert!(h.fine.vertex_elements(u).iter().all(|&t| allowed[h.parent(t)]));
            }
        }
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(usize, f64)> = (1..5).map(|m| (m, (-0.7 * m as f64).exp())).collect();
        assert!((log_slope(&pts) + 0.7).abs() < 1e-12);
    }
}
