use rayon::prelude::*;
use serde::Serialize;

use super::reference::{bubble, solve3, weighted_mass};
use crate::error::{Error, Result};
use crate::fem::{element_projection_weights, p1_gradients, QuadratureRule};
use crate::mesh::{barycentric, classify_vertices, Hierarchy, InterfaceGeometry, Side, VertexClasses};
use crate::quasi_interp::InterpolationOperator;
use crate::scalar::{from_usize, Point, Scalar};

/// Dual function `η^a = b·w` on the host element `K⋆ ⊂ ω^a ∩ Ω₊`, normalized so that
/// `P_{K⋆} η^a = ♯a ψ^a|_{K⋆}` and hence `m^{a'}(η^a) = δ_{a a'}`.
#[derive(Clone, Debug, Serialize)]
pub struct DualFunction<T> {
    pub vertex: usize,
    pub host: usize,
    /// Coefficients of `w` in the barycentric basis of the host.
    pub w: [T; 3],
    pub h1_seminorm: T,
    host_points: [Point<T>; 3],
}

impl<T: Scalar> DualFunction<T> {
    pub fn host_points(&self) -> &[Point<T>; 3] {
        &self.host_points
    }

    fn linear(&self, lam: [T; 3]) -> T {
        (0..3).map(|i| self.w[i] * lam[i]).sum()
    }

    pub fn eval(&self, x: Point<T>) -> T {
        let lam = barycentric(&self.host_points, x);
        if lam.iter().any(|&l| l < -T::geometric_tol()) {
            return T::zero();
        }
        bubble(lam) * self.linear(lam)
    }

    pub fn grad(&self, x: Point<T>) -> [T; 2] {
        let lam = barycentric(&self.host_points, x);
        if lam.iter().any(|&l| l < -T::geometric_tol()) {
            return [T::zero(); 2];
        }
        let (g, _) = p1_gradients(&self.host_points);
        let b = bubble(lam);
        let wl = self.linear(lam);
        let mut out = [T::zero(); 2];
        for d in 0..2 {
            let db = g[0][d] * lam[1] * lam[2] + g[1][d] * lam[0] * lam[2] + g[2][d] * lam[0] * lam[1];
            let dw: T = (0..3).map(|i| self.w[i] * g[i][d]).sum();
            out[d] = db * wl + b * dw;
        }
        out
    }
}

/// Host element: the largest element of ω^a inside Ω₊, ties to the smallest index.
pub fn host_element<T: Scalar>(hier: &Hierarchy<T>, geom: &InterfaceGeometry<T>, a: usize) -> Result<usize> {
    let mesh = &hier.coarse;
    let mut best: Option<(usize, T)> = None;
    for &k in mesh.vertex_elements(a) {
        let tri = mesh.element_points(k);
        let inside = match geom.minus_area(&tri) {
            Some(m) => m <= T::geometric_tol() * mesh.area(k),
            None => false,
        } && tri.iter().all(|&p| geom.side(p) != Some(Side::Minus));
        if !inside {
            continue;
        }
        let area = mesh.area(k);
        best = match best {
            Some((b, ba)) if ba > area || (ba == area && b < k) => Some((b, ba)),
            _ => Some((k, area)),
        };
    }
    best.map(|b| b.0).ok_or_else(|| {
        Error::Precondition(format!("no coarse element of the patch of vertex {a} lies in the plus region"))
    })
}

fn local_index<T: Scalar>(hier: &Hierarchy<T>, k: usize, a: usize) -> usize {
    hier.coarse.element(k).iter().position(|&v| v == a).expect("vertex of its host")
}

fn check_vertex<T: Scalar>(hier: &Hierarchy<T>, geom: &InterfaceGeometry<T>, a: usize) -> Result<()> {
    if a >= hier.coarse.num_vertices() || hier.coarse.is_boundary(a) {
        return Err(Error::Precondition(format!("vertex {a} is not an interior coarse vertex")));
    }
    if geom.side(hier.coarse.vertex(a)) == Some(Side::Minus) {
        return Err(Error::Precondition(format!("vertex {a} lies in the minus region")));
    }
    Ok(())
}

/// Polynomial dual function, all inner products by degree-8 quadrature.
pub fn build_dual_function<T: Scalar>(
    op: &InterpolationOperator<'_, T>,
    geom: &InterfaceGeometry<T>,
    a: usize,
) -> Result<DualFunction<T>> {
    let hier = op.hierarchy();
    check_vertex(hier, geom, a)?;
    let host = host_element(hier, geom, a)?;
    let tri = hier.coarse.element_points(host);
    let loc = local_index(hier, host, a);
    let mb = weighted_mass(&tri, 8, bubble);
    let m = weighted_mass(&tri, 8, |_| T::one());
    let sharp = from_usize::<T>(op.sharp(a));
    let w = solve3(mb, [sharp * m[loc][0], sharp * m[loc][1], sharp * m[loc][2]])?;
    let mut eta = DualFunction { vertex: a, host, w, h1_seminorm: T::zero(), host_points: tri };
    let rule = QuadratureRule::<T>::with_degree(8);
    let area = hier.coarse.area(host);
    let mut s = T::zero();
    for (x, wt) in rule.map(&tri) {
        let g = eta.grad(x);
        s += wt * area * (g[0] * g[0] + g[1] * g[1]);
    }
    eta.h1_seminorm = s.sqrt();
    Ok(eta)
}

/// Fine-space dual function `η_h = I_h(b w)` with `w` chosen so that `P_{K⋆} η_h = ♯a ψ^a`
/// holds exactly; needs interior fine vertices in the host (two refinement levels).
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteDual<T> {
    pub vertex: usize,
    pub host: usize,
    /// Nonzero fine nodal values.
    pub values: Vec<(usize, T)>,
}

pub fn build_discrete_dual<T: Scalar>(
    op: &InterpolationOperator<'_, T>,
    geom: &InterfaceGeometry<T>,
    a: usize,
) -> Result<DiscreteDual<T>> {
    let hier = op.hierarchy();
    check_vertex(hier, geom, a)?;
    let host = host_element(hier, geom, a)?;
    let tri = hier.coarse.element_points(host);
    let loc = local_index(hier, host, a);
    let weights = element_projection_weights(hier, host)?;
    // g_i = I_h(b λ_i) and the columns P_{K⋆} g_i
    let mut g: Vec<(usize, [T; 3])> = Vec::new();
    let mut p = [[T::zero(); 3]; 3];
    for (u, wu) in &weights {
        let lam = barycentric(&tri, hier.fine.vertex(*u));
        let b = bubble(lam);
        if b.abs() <= T::geometric_tol() {
            continue;
        }
        let gi = lam.map(|l| b * l);
        for r in 0..3 {
            for c in 0..3 {
                p[r][c] += wu[r] * gi[c];
            }
        }
        g.push((*u, gi));
    }
    if g.is_empty() {
        return Err(Error::Precondition(
            "discrete dual functions need the fine mesh two levels below the coarse one".into(),
        ));
    }
    let mut rhs = [T::zero(); 3];
    rhs[loc] = from_usize(op.sharp(a));
    let w = solve3(p, rhs)?;
    let values = g
        .into_iter()
        .map(|(u, gi)| (u, (0..3).map(|i| w[i] * gi[i]).sum()))
        .collect();
    Ok(DiscreteDual { vertex: a, host, values })
}

/// Discrete duals for every vertex of V⁰ ∪ V⁺, in vertex order.
pub fn build_discrete_duals<T: Scalar>(
    op: &InterpolationOperator<'_, T>,
    geom: &InterfaceGeometry<T>,
) -> Result<(VertexClasses, Vec<DiscreteDual<T>>)> {
    let classes = classify_vertices(&op.hierarchy().coarse, geom);
    let duals = classes
        .plus_or_interface()
        .par_iter()
        .map(|&a| build_discrete_dual(op, geom, a))
        .collect::<Result<Vec<_>>>()?;
    Ok((classes, duals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshPattern;
    use crate::tcoercivity::reference_constants;

    fn setup() -> (Hierarchy<f64>, InterfaceGeometry<f64>) {
        (Hierarchy::new(2, 4, MeshPattern::CrissCross).unwrap(), InterfaceGeometry::flat(0.5).unwrap())
    }

    #[test]
    fn polynomial_dual_properties() {
        let (h, g) = setup();
        let op = InterpolationOperator::new(&h).unwrap();
        let c = reference_constants::<f64>();
        for a in classify_vertices(&h.coarse, &g).plus_or_interface() {
            let eta = build_dual_function(&op, &g, a).unwrap();
            let tri = *eta.host_points();
            // vanishes on the host boundary
            for t in [0.1, 0.5, 0.9] {
                let p = [tri[0][0] + t * (tri[1][0] - tri[0][0]), tri[0][1] + t * (tri[1][1] - tri[0][1])];
                assert!(eta.eval(p).abs() < 1e-14);
            }
            // P_K η = ♯a ψ^a: residuals against the local basis
            let rule = QuadratureRule::<f64>::with_degree(8);
            let area = h.coarse.area(eta.host);
            let loc = h.coarse.element(eta.host).iter().position(|&v| v == a).unwrap();
            for j in 0..3 {
                let mut r = 0.0;
                for (x, w) in rule.map(&tri) {
                    let lam = barycentric(&tri, x);
                    let psi = if loc == 0 { lam[0] } else if loc == 1 { lam[1] } else { lam[2] };
                    r += w * area * (eta.eval(x) - op.sharp(a) as f64 * psi) * lam[j];
                }
                assert!(r.abs() < 1e-12, "{r}");
            }
            let bound = op.sharp(a) as f64 * c.c_norm * c.c_inv * area.sqrt() / h.coarse.inradius(eta.host);
            assert!(eta.h1_seminorm <= bound, "{} > {bound}", eta.h1_seminorm);
        }
    }

    #[test]
    fn discrete_duality() {
        let (h, g) = setup();
        let op = InterpolationOperator::new(&h).unwrap();
        let (classes, duals) = build_discrete_duals(&op, &g).unwrap();
        for d in &duals {
            let mut v = vec![0.0; h.fine.num_vertices()];
            for &(u, x) in &d.values {
                v[u] = x;
            }
            for &b in &classes.interior {
                let m = op.vertex_weight(b, &v).unwrap();
                let expected = if b == d.vertex { 1.0 } else { 0.0 };
                assert!((m - expected).abs() < 1e-12, "{m} at {b} for {}", d.vertex);
            }
            assert!(d.values.iter().all(|&(u, _)| g.side(h.fine.vertex(u)) == Some(Side::Plus)));
        }
    }

    #[test]
    fn one_level_gap_is_rejected() {
        let h = Hierarchy::new(2, 3, MeshPattern::CrissCross).unwrap();
        let g = InterfaceGeometry::flat(0.5).unwrap();
        let op = InterpolationOperator::new(&h).unwrap();
        assert!(matches!(build_discrete_duals(&op, &g), Err(Error::Precondition(_))));
    }

    #[test]
    fn minus_vertices_have_no_dual() {
        let (h, g) = setup();
        let op = InterpolationOperator::new(&h).unwrap();
        let a = h.coarse.vertex_at([0.5, 0.75]).unwrap();
        assert!(build_dual_function(&op, &g, a).is_err());
    }
}
