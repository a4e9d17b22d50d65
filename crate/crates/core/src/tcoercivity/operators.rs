use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::dual::DiscreteDual;
use super::SymmetrizationMap;
use crate::correctors::FineProblem;
use crate::error::{Error, Result};
use crate::fem::{abs_sigma_integrals, p1_gradients, stiffness_from_integrals, Coefficient, FeFunction, QuadratureRule};
use crate::mesh::Triangulation;
use crate::quasi_interp::InterpolationOperator;
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::sparse_linalg::SaddleFactorization;

fn on_gridline<T: Scalar>(mesh: &Triangulation<T>, l: T) -> bool {
    let s = l * from_usize::<T>(mesh.blocks_per_side());
    (s - s.round()).abs() <= T::geometric_tol() * from_usize::<T>(mesh.blocks_per_side())
}

/// Nodal interpolant of `T v`: `-v` on Ω₋ and Γ, `v - 2 S v` on Ω₊.
pub fn apply_t<T: Scalar>(sym: &SymmetrizationMap<T>, mesh: &Triangulation<T>, v: &[T]) -> Result<Vec<T>> {
    let l = sym.height();
    if !on_gridline(mesh, l) {
        return Err(Error::Precondition(format!(
            "the interface x2 = {} is not a gridline of the mesh",
            to_f64(l)
        )));
    }
    let f = FeFunction::new(mesh, v.to_vec())?;
    let tol = T::geometric_tol();
    Ok(mesh
        .vertices()
        .iter()
        .zip(v)
        .map(|(&x, &vx)| if x[1] >= l - tol { -vx } else { vx - lit::<T>(2.0) * f.eval(sym.forward(x)) })
        .collect())
}

/// `T_H w = T w - Σ_a m^a(T w) η^a` over the duals of V⁰ ∪ V⁺.
pub fn apply_t_h<T: Scalar>(
    op: &InterpolationOperator<'_, T>,
    sym: &SymmetrizationMap<T>,
    duals: &[DiscreteDual<T>],
    w: &[T],
) -> Result<Vec<T>> {
    let hier = op.hierarchy();
    if !on_gridline(&hier.coarse, sym.height()) {
        return Err(Error::Precondition("the coarse mesh does not resolve the interface".into()));
    }
    if w.len() != hier.fine.num_vertices() {
        return Err(Error::DimensionMismatch("fine nodal vector expected".into()));
    }
    let scale = w.iter().fold(T::zero(), |s, x| s.max(x.abs()));
    let residual = op.interpolation_matrix().mul_vec(w).iter().fold(T::zero(), |s, x| s.max(x.abs()));
    if residual > T::solve_tol() * scale.max(T::one()) {
        return Err(Error::Precondition(format!(
            "argument violates the kernel constraints by {:e}",
            to_f64(residual)
        )));
    }
    let mut tw = apply_t(sym, &hier.fine, w)?;
    let weights: Vec<T> = duals.iter().map(|d| op.vertex_weight(d.vertex, &tw)).collect::<Result<_>>()?;
    for (d, m) in duals.iter().zip(weights) {
        for &(u, x) in &d.values {
            tw[u] -= m * x;
        }
    }
    Ok(tw)
}

/// Sampled T- and T_H-coercivity diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub contrast: f64,
    pub alpha_theoretical: f64,
    pub alpha_sampled_min: f64,
    pub alpha_sampled_median: f64,
    /// min a(v, T v)/|v|²_{1,σ} over unconstrained samples.
    pub alpha_full_min: f64,
    #[serde(rename = "c_pm_T")]
    pub c_pm_t: f64,
    #[serde(rename = "c_pm_T_measured")]
    pub c_pm_t_measured: f64,
    #[serde(rename = "c_pm_TH_measured")]
    pub c_pm_th_measured: f64,
    pub samples: usize,
}

struct Seminorms<T> {
    abs_sigma: Vec<T>,
    plus: Vec<bool>,
}

impl<T: Scalar> Seminorms<T> {
    /// (|v|²_{1,σ,Ω}, |v|²_{1,Ω₊}, |v|²_{1,Ω₋})
    fn eval(&self, mesh: &Triangulation<T>, v: &[T]) -> (T, T, T) {
        let (mut s, mut p, mut m) = (T::zero(), T::zero(), T::zero());
        for e in 0..mesh.num_elements() {
            let (g, area) = p1_gradients(&mesh.element_points(e));
            let el = mesh.element(e);
            let gx: T = (0..3).map(|i| v[el[i]] * g[i][0]).sum();
            let gy: T = (0..3).map(|i| v[el[i]] * g[i][1]).sum();
            let g2 = gx * gx + gy * gy;
            s += self.abs_sigma[e] * g2;
            if self.plus[e] {
                p += area * g2;
            } else {
                m += area * g2;
            }
        }
        (s, p, m)
    }
}

/// Projects random fine functions into `W` with the H¹-seminorm saddle projection and
/// evaluates `a(w, T_H w)/|w|²_{1,σ}`; the same is done for `T` on unconstrained samples.
pub fn coercivity_probe<T: Scalar>(
    fp: &FineProblem<'_, T>,
    sigma: &Coefficient<T>,
    duals: &[DiscreteDual<T>],
    samples: usize,
    seed: u64,
) -> Result<CoercivityReport> {
    let sym = fp.sym.ok_or_else(|| Error::Precondition("coercivity probe needs a flat interface".into()))?;
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is needed".into()));
    }
    let hier = fp.hier;
    let fine = &hier.fine;
    let geom = sigma.geometry().ok_or_else(|| Error::Precondition("coefficient has no interface".into()))?;
    let norms = Seminorms {
        abs_sigma: abs_sigma_integrals(fine, sigma, &QuadratureRule::with_degree(2), false),
        plus: (0..fine.num_elements()).map(|e| geom.side_or_minus(fine.centroid(e)) == crate::mesh::Side::Plus).collect(),
    };
    let areas: Vec<T> = (0..fine.num_elements()).map(|e| fine.area(e)).collect();
    let laplace = stiffness_from_integrals(fine, &areas)?;
    let all: Vec<usize> = (0..hier.coarse.num_elements()).collect();
    let dofs = fp.op.patch_fine_dofs(&all);
    let a1 = laplace.submatrix(dofs.vertices(), dofs.vertices());
    let c = fp.op.constraint_matrix(&all, &dofs)?;
    let projector = SaddleFactorization::new(&a1, &c.matrix)?;

    let results: Vec<Result<[f64; 4]>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let z: Vec<T> = (0..dofs.len()).map(|_| lit(rng.gen_range(-1.0..1.0))).collect();
            let (w, _) = projector.solve(&a1.mul_vec(&z))?;
            let w = dofs.extend(&w);
            let thw = apply_t_h(&fp.op, &sym, duals, &w)?;
            let (ws, _, wm) = norms.eval(fine, &w);
            let diff: Vec<T> = w.iter().zip(&thw).map(|(a, b)| *a - *b).collect();
            let (_, dp, _) = norms.eval(fine, &diff);
            let ratio_h = fp.stiffness.bilinear(&w, &thw) / ws;
            let v = dofs.extend(&z);
            let tv = apply_t(&sym, fine, &v)?;
            let (vs, _, vm) = norms.eval(fine, &v);
            let diff: Vec<T> = v.iter().zip(&tv).map(|(a, b)| *a - *b).collect();
            let (_, tp, _) = norms.eval(fine, &diff);
            let ratio = fp.stiffness.bilinear(&v, &tv) / vs;
            Ok([to_f64(ratio_h), to_f64((dp / wm).sqrt()), to_f64(ratio), to_f64((tp / vm).sqrt())])
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut alphas: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    alphas.sort_by(f64::total_cmp);
    let max_of = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, f64::max);
    let c_pm_th = max_of(1);
    let b = sigma.bounds;
    let spread = to_f64(b.sup_plus / b.inf_plus);
    let contrast = to_f64(sigma.contrast());
    Ok(CoercivityReport {
        contrast,
        alpha_theoretical: 1.0 - 0.5 * c_pm_th * spread * (1.0 / contrast).sqrt(),
        alpha_sampled_min: alphas[0],
        alpha_sampled_median: alphas[alphas.len() / 2],
        alpha_full_min: rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min),
        c_pm_t: to_f64(sym.c_pm),
        c_pm_t_measured: max_of(3),
        c_pm_th_measured: c_pm_th,
        samples,
    })
}
