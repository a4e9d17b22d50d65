use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::assembly::p1_gradients;
use super::coefficient::Coefficient;
use super::field::{element_points, SideFn, SideVecFn};
use super::QuadratureRule;
use crate::mesh::{barycentric, InterfaceGeometry, Side, Triangulation};
use crate::scalar::{lit, Point, Scalar};

/// L², H¹-seminorm and σ-weighted energy seminorm of a function or an error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Norms<T> {
    pub l2: T,
    pub h1_semi: T,
    pub sigma_energy: T,
}

/// Closed-form solution with its gradient, each defined branch-wise.
#[derive(Clone)]
pub struct ExactSolution<T> {
    pub geom: Option<InterfaceGeometry<T>>,
    pub value: SideFn<T>,
    pub gradient: SideVecFn<T>,
}

impl<T: std::fmt::Debug> std::fmt::Debug for ExactSolution<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactSolution").field("geom", &self.geom).finish_non_exhaustive()
    }
}

impl<T: Scalar> ExactSolution<T> {
    pub fn smooth(
        value: impl Fn(Point<T>) -> T + Send + Sync + 'static,
        gradient: impl Fn(Point<T>) -> [T; 2] + Send + Sync + 'static,
    ) -> Self {
        Self {
            geom: None,
            value: Arc::new(move |x, _| value(x)),
            gradient: Arc::new(move |x, _| gradient(x)),
        }
    }

    pub fn side_at(&self, x: Point<T>) -> Side {
        self.geom.as_ref().map_or(Side::Plus, |g| g.side_or_minus(x))
    }

    pub fn eval(&self, x: Point<T>) -> T {
        (self.value)(x, self.side_at(x))
    }

    pub fn grad(&self, x: Point<T>) -> [T; 2] {
        (self.gradient)(x, self.side_at(x))
    }
}

/// Norms of a P1 function; `abs_sigma` holds `∫_K |σ|` per element.
pub fn fe_norms<T: Scalar>(mesh: &Triangulation<T>, v: &[T], abs_sigma: Option<&[T]>) -> Norms<T> {
    let (mut l2, mut h1, mut en) = (T::zero(), T::zero(), T::zero());
    for e in 0..mesh.num_elements() {
        let el = mesh.element(e);
        let vals = el.map(|i| v[i]);
        let tri = mesh.element_points(e);
        let (g, area) = p1_gradients(&tri);
        let sum = vals[0] + vals[1] + vals[2];
        let sq = vals[0] * vals[0] + vals[1] * vals[1] + vals[2] * vals[2];
        l2 += area * (sq + sum * sum) / lit(12.0);
        let gx: T = (0..3).map(|i| vals[i] * g[i][0]).sum();
        let gy: T = (0..3).map(|i| vals[i] * g[i][1]).sum();
        let grad2 = gx * gx + gy * gy;
        h1 += area * grad2;
        if let Some(s) = abs_sigma {
            en += s[e] * grad2;
        }
    }
    Norms {
        l2: l2.max(T::zero()).sqrt(),
        h1_semi: h1.sqrt(),
        sigma_energy: if abs_sigma.is_some() { en.sqrt() } else { h1.sqrt() },
    }
}

/// Norms of `u - v` for a closed-form `u` by element quadrature; `sigma` weights the
/// energy seminorm with `|σ|` (the H¹ seminorm is reported when absent).
pub fn error_norms_exact<T: Scalar>(
    mesh: &Triangulation<T>,
    v: &[T],
    exact: &ExactSolution<T>,
    sigma: Option<&Coefficient<T>>,
    rule: &QuadratureRule<T>,
    split: bool,
) -> Norms<T> {
    let parts: Vec<[T; 3]> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let tri = mesh.element_points(e);
            let el = mesh.element(e);
            let (g, _) = p1_gradients(&tri);
            let gx: T = (0..3).map(|i| v[el[i]] * g[i][0]).sum();
            let gy: T = (0..3).map(|i| v[el[i]] * g[i][1]).sum();
            let mut acc = [T::zero(); 3];
            for q in element_points(exact.geom.as_ref(), &tri, rule, split) {
                let b = barycentric(&tri, q.x);
                let vh: T = (0..3).map(|i| b[i] * v[el[i]]).sum();
                let u = (exact.value)(q.x, q.side);
                let du = (exact.gradient)(q.x, q.side);
                let dx = du[0] - gx;
                let dy = du[1] - gy;
                let grad2 = dx * dx + dy * dy;
                acc[0] += q.weight * (u - vh) * (u - vh);
                acc[1] += q.weight * grad2;
                if let Some(s) = sigma {
                    acc[2] += q.weight * s.eval(q.x).abs() * grad2;
                }
            }
            acc
        })
        .collect();
    let mut tot = [T::zero(); 3];
    for p in parts {
        for k in 0..3 {
            tot[k] += p[k];
        }
    }
    let clamp = |x: T| x.max(T::zero()).sqrt();
    Norms {
        l2: clamp(tot[0]),
        h1_semi: clamp(tot[1]),
        sigma_energy: if sigma.is_some() { clamp(tot[2]) } else { clamp(tot[1]) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_sigma_stiffness, FeFunction};
    use crate::mesh::build_block_mesh;

    #[test]
    fn hat_seminorm_matches_quadratic_form() {
        let level = 3;
        let m: Triangulation<f64> = build_block_mesh(level).unwrap();
        let a = assemble_sigma_stiffness(&m, &Coefficient::constant(1.0), &QuadratureRule::with_degree(2), false)
            .unwrap();
        // grid vertex: 8 half-right triangles with the 45° angle at the vertex give 4;
        // block center: 4 triangles with the right angle at the vertex give 4
        for p in [[0.5, 0.5], [0.5 + 1.0 / 16.0, 0.5 + 1.0 / 16.0]] {
            let v = m.vertex_at(p).unwrap();
            let hat = FeFunction::hat(&m, v);
            let n = fe_norms(&m, hat.values(), None);
            assert!((n.h1_semi * n.h1_semi - 4.0).abs() < 1e-12);
            assert!((a.bilinear(hat.values(), hat.values()) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_equals_seminorm_for_unit_coefficient() {
        let m: Triangulation<f64> = build_block_mesh(3).unwrap();
        let v = FeFunction::interpolate(&m, |p| p[0] * p[1] * (1.0 - p[0]));
        let areas: Vec<f64> = (0..m.num_elements()).map(|e| m.area(e)).collect();
        let n = fe_norms(&m, v.values(), Some(&areas));
        assert!((n.sigma_energy - n.h1_semi).abs() < 1e-14);
    }

    #[test]
    fn exact_norms_of_interpolant_vanish_for_linear() {
        let m: Triangulation<f64> = build_block_mesh(2).unwrap();
        let v = FeFunction::interpolate(&m, |p| 3.0 * p[0] - p[1]);
        let u = ExactSolution::smooth(|p: [f64; 2]| 3.0 * p[0] - p[1], |_| [3.0, -1.0]);
        let n = error_norms_exact(&m, v.values(), &u, None, &QuadratureRule::with_degree(6), false);
        assert!(n.l2 < 1e-14 && n.h1_semi < 1e-13);
    }

    #[test]
    fn l2_of_constant() {
        let m: Triangulation<f64> = build_block_mesh(2).unwrap();
        let v = vec![2.0; m.num_vertices()];
        assert!((fe_norms(&m, &v, None).l2 - 2.0).abs() < 1e-14);
    }
}
