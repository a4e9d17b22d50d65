use rayon::prelude::*;

use super::coefficient::Coefficient;
use super::field::PiecewiseField;
use super::QuadratureRule;
use crate::error::{Error, Result};
use crate::mesh::Triangulation;
use crate::scalar::{lit, Point, Scalar};
use crate::sparse_linalg::SparseMatrix;

/// Gradients of the three barycentric coordinates of a triangle and its signed area.
pub fn p1_gradients<T: Scalar>(tri: &[Point<T>; 3]) -> ([[T; 2]; 3], T) {
    let [a, b, c] = *tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let grads = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    (grads, det * lit(0.5))
}

/// `∫_K g(σ)` for every element.
pub fn element_integrals<T: Scalar>(
    mesh: &Triangulation<T>,
    field: &PiecewiseField<T>,
    rule: &QuadratureRule<T>,
    split: bool,
    g: impl Fn(T) -> T + Sync,
) -> Vec<T> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| field.integrate(&mesh.element_points(e), rule, split, |_, v| g(v)))
        .collect()
}

/// `∫_K σ` for every element; the σ-stiffness only depends on these.
pub fn sigma_integrals<T: Scalar>(
    mesh: &Triangulation<T>,
    sigma: &Coefficient<T>,
    rule: &QuadratureRule<T>,
    split: bool,
) -> Vec<T> {
    element_integrals(mesh, sigma.field(), rule, split, |v| v)
}

/// `∫_K |σ|` for every element, the weights of the σ-energy seminorm.
pub fn abs_sigma_integrals<T: Scalar>(
    mesh: &Triangulation<T>,
    sigma: &Coefficient<T>,
    rule: &QuadratureRule<T>,
    split: bool,
) -> Vec<T> {
    element_integrals(mesh, sigma.field(), rule, split, |v| v.abs())
}

/// Local matrix `(∫_K σ) ∇λ_j·∇λ_i`.
pub fn element_stiffness<T: Scalar>(tri: &[Point<T>; 3], sigma_integral: T) -> [[T; 3]; 3] {
    let (g, _) = p1_gradients(tri);
    let mut k = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = sigma_integral * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// Stiffness matrix on all vertices from precomputed element integrals of σ.
pub fn stiffness_from_integrals<T: Scalar>(
    mesh: &Triangulation<T>,
    integrals: &[T],
) -> Result<SparseMatrix<T>> {
    if integrals.len() != mesh.num_elements() {
        return Err(Error::DimensionMismatch("one σ-integral per element expected".into()));
    }
    if let Some(e) = (0..mesh.num_elements()).find(|&e| mesh.signed_area(e) <= T::zero()) {
        return Err(Error::NonPositiveArea { element: e });
    }
    let local: Vec<[(usize, usize, T); 9]> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let k = element_stiffness(&mesh.element_points(e), integrals[e]);
            let el = mesh.element(e);
            let mut out = [(0, 0, T::zero()); 9];
            for i in 0..3 {
                for j in 0..3 {
                    out[3 * i + j] = (el[i], el[j], k[i][j]);
                }
            }
            out
        })
        .collect();
    let n = mesh.num_vertices();
    let mut a = SparseMatrix::from_triplets(n, n, local.into_iter().flatten().collect())?;
    a.mark_symmetric()?;
    Ok(a)
}

pub fn assemble_sigma_stiffness<T: Scalar>(
    mesh: &Triangulation<T>,
    sigma: &Coefficient<T>,
    rule: &QuadratureRule<T>,
    split: bool,
) -> Result<SparseMatrix<T>> {
    if rule.degree < 2 {
        return Err(Error::InvalidArgument("stiffness assembly needs a rule of degree ≥ 2".into()));
    }
    stiffness_from_integrals(mesh, &sigma_integrals(mesh, sigma, rule, split))
}

/// Exact P1 mass matrix on all vertices.
pub fn assemble_mass<T: Scalar>(mesh: &Triangulation<T>) -> Result<SparseMatrix<T>> {
    let mut t = Vec::with_capacity(9 * mesh.num_elements());
    let twelfth = lit::<T>(1.0 / 12.0);
    for e in 0..mesh.num_elements() {
        let el = mesh.element(e);
        let s = mesh.area(e) * twelfth;
        for i in 0..3 {
            for j in 0..3 {
                t.push((el[i], el[j], if i == j { s + s } else { s }));
            }
        }
    }
    let n = mesh.num_vertices();
    let mut m = SparseMatrix::from_triplets(n, n, t)?;
    m.mark_symmetric()?;
    Ok(m)
}

/// Load vector `b_i = ∫ f φ_i` on all vertices.
pub fn assemble_load<T: Scalar>(
    mesh: &Triangulation<T>,
    f: &PiecewiseField<T>,
    rule: &QuadratureRule<T>,
    split: bool,
) -> Vec<T> {
    let local: Vec<[T; 3]> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let tri = mesh.element_points(e);
            let mut out = [T::zero(); 3];
            for q in f.points(&tri, rule, split) {
                let b = crate::mesh::barycentric(&tri, q.x);
                let v = q.weight * f.eval_side(q.x, q.side);
                for i in 0..3 {
                    out[i] += v * b[i];
                }
            }
            out
        })
        .collect();
    let mut b = vec![T::zero(); mesh.num_vertices()];
    for (e, vals) in local.into_iter().enumerate() {
        for (i, &v) in mesh.element(e).iter().enumerate() {
            b[v] += vals[i];
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::DofMap;
    use crate::mesh::{build_block_mesh, InterfaceGeometry};

    fn rule() -> QuadratureRule<f64> {
        QuadratureRule::with_degree(2)
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let m = build_block_mesh(1).unwrap();
        let a = assemble_sigma_stiffness(&m, &Coefficient::constant(1.0), &rule(), false).unwrap();
        for v in m.interior_vertices() {
            let s: f64 = a.row(v).1.iter().sum();
            assert!(s.abs() < 1e-13);
        }
        // the center of a block has four neighbours at distance h/√2 with weight -1
        let c = m.vertex_at([0.25, 0.25]).unwrap();
        assert!((a.get(c, c) - 4.0).abs() < 1e-13);
        let mid = m.vertex_at([0.5, 0.5]).unwrap();
        assert!((a.get(mid, mid) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn negative_coefficient_negates() {
        let m = build_block_mesh(2).unwrap();
        let a = assemble_sigma_stiffness(&m, &Coefficient::constant(1.0), &rule(), false).unwrap();
        let b = assemble_sigma_stiffness(&m, &Coefficient::constant(-1.0), &rule(), false).unwrap();
        for (i, j, v) in a.triplets() {
            assert_eq!(b.get(i, j), -v);
        }
    }

    #[test]
    fn flat_coefficient_is_indefinite() {
        let m = build_block_mesh(4).unwrap();
        let g = InterfaceGeometry::flat(0.5 - 2f64.powi(-7)).unwrap();
        let a = assemble_sigma_stiffness(&m, &Coefficient::piecewise_constant(g, 1.0, 2.0), &rule(), false)
            .unwrap();
        let lo = m.vertex_at([0.5, 0.25]).unwrap();
        let hi = m.vertex_at([0.5, 0.75]).unwrap();
        assert!(a.get(lo, lo) > 0.0);
        assert!(a.get(hi, hi) < 0.0);
    }

    #[test]
    fn mass_total_and_hat_integrals() {
        let m = build_block_mesh(3).unwrap();
        let mass = assemble_mass(&m).unwrap();
        let total: f64 = mass.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        let b = assemble_load(&m, &PiecewiseField::constant(1.0), &rule(), false);
        for v in 0..m.num_vertices() {
            let patch: f64 = m.vertex_elements(v).iter().map(|&e| m.area(e)).sum();
            assert!((b[v] - patch / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn split_load_with_jump() {
        let m = build_block_mesh(2).unwrap();
        let g = InterfaceGeometry::flat(0.1).unwrap();
        let f = PiecewiseField::piecewise(g, |_, s| match s {
            crate::mesh::Side::Minus => 1.0,
            crate::mesh::Side::Plus => 0.1,
        });
        let r = QuadratureRule::with_degree(4);
        let total: f64 = assemble_load(&m, &f, &r, true).iter().sum();
        assert!((total - (0.1 * 0.1 + 0.9)).abs() < 1e-13);
    }

    #[test]
    fn poisson_converges_linearly() {
        // u = sin(πx)sin(πy), -Δu = 2π² u
        use std::f64::consts::PI;
        let mut errs = Vec::new();
        for level in 2..=5 {
            let m = build_block_mesh(level).unwrap();
            let a = assemble_sigma_stiffness(&m, &Coefficient::constant(1.0), &rule(), false).unwrap();
            let f = PiecewiseField::smooth(|p: [f64; 2]| 2.0 * PI * PI * (PI * p[0]).sin() * (PI * p[1]).sin());
            let b = assemble_load(&m, &f, &QuadratureRule::with_degree(6), false);
            let dofs = DofMap::interior(&m);
            let ai = a.submatrix(dofs.vertices(), dofs.vertices());
            let x = crate::sparse_linalg::lu_solve(&ai, &dofs.restrict(&b)).unwrap();
            let u = dofs.extend(&x);
            let exact = crate::fem::ExactSolution::smooth(
                |p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1]).sin(),
                |p: [f64; 2]| [PI * (PI * p[0]).cos() * (PI * p[1]).sin(), PI * (PI * p[0]).sin() * (PI * p[1]).cos()],
            );
            let e = crate::fem::error_norms_exact(&m, &u, &exact, None, &QuadratureRule::with_degree(6), false);
            errs.push(e.h1_semi);
        }
        for w in errs.windows(2) {
            let eoc = (w[0] / w[1]).log2();
            assert!((eoc - 1.0).abs() < 0.15, "eoc {eoc}");
        }
    }
}
