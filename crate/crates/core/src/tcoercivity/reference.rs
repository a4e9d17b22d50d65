use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{p1_gradients, QuadratureRule};
use crate::scalar::{lit, Point, Scalar};

pub(crate) type Mat3<T> = [[T; 3]; 3];

/// Constants of the reference triangle with vertices (0,0), (1/√2,0), (0,1/√2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferenceConstants<T> {
    /// sup ‖q‖ / ‖b^{1/2} q‖ over P1.
    pub c_norm: T,
    /// |K̂|^{1/2} sup ‖q‖_∞ / ‖q‖ over P1.
    pub c_inf: T,
    /// sup |q|₁ / ‖q‖ over P1.
    pub c_inv: T,
}

pub fn reference_triangle<T: Scalar>() -> [Point<T>; 3] {
    let s = lit::<T>(0.5).sqrt();
    [[T::zero(), T::zero()], [s, T::zero()], [T::zero(), s]]
}

/// Cubic bubble `λ₁λ₂λ₃`.
pub fn bubble<T: Scalar>(lambda: [T; 3]) -> T {
    lambda[0] * lambda[1] * lambda[2]
}

/// `∫_K ω λ_i λ_j` with weight `ω(λ)`, by quadrature of the given degree.
pub(crate) fn weighted_mass<T: Scalar>(
    tri: &[Point<T>; 3],
    degree: usize,
    weight: impl Fn([T; 3]) -> T,
) -> Mat3<T> {
    let rule = QuadratureRule::<T>::with_degree(degree);
    let area = crate::mesh::polygon_area(&tri[..]).abs();
    let mut m = [[T::zero(); 3]; 3];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let om = weight(*p) * *w * area;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += om * p[i] * p[j];
            }
        }
    }
    m
}

pub(crate) fn solve3<T: Scalar>(a: Mat3<T>, b: [T; 3]) -> Result<[T; 3]> {
    let mut m = a;
    let mut x = b;
    let scale = a.iter().flatten().fold(T::zero(), |s, v| s.max(v.abs()));
    for c in 0..3 {
        let p = (c..3)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        if m[p][c].abs() <= scale * T::pivot_tol() {
            return Err(Error::SingularSystem { row: c, pivot: crate::scalar::to_f64(m[p][c]) });
        }
        m.swap(c, p);
        x.swap(c, p);
        for r in c + 1..3 {
            let f = m[r][c] / m[c][c];
            for k in c..3 {
                let v = m[c][k];
                m[r][k] -= f * v;
            }
            let v = x[c];
            x[r] -= f * v;
        }
    }
    for c in (0..3).rev() {
        let mut s = x[c];
        for k in c + 1..3 {
            s -= m[c][k] * x[k];
        }
        x[c] = s / m[c][c];
    }
    Ok(x)
}

/// Eigenvalues of a symmetric 3×3 matrix by cyclic Jacobi rotations.
pub(crate) fn symmetric_eigenvalues<T: Scalar>(a: Mat3<T>) -> [T; 3] {
    let mut a = a;
    for _ in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= T::epsilon() * T::epsilon() * diag {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (lit::<T>(2.0) * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = (t * t + T::one()).sqrt().recip();
            let s = t * c;
            let mut j = [[T::zero(); 3]; 3];
            for (i, row) in j.iter_mut().enumerate() {
                row[i] = T::one();
            }
            j[p][p] = c;
            j[q][q] = c;
            j[p][q] = s;
            j[q][p] = -s;
            // a ← Jᵀ a J
            let mut aj = [[T::zero(); 3]; 3];
            for r in 0..3 {
                for k in 0..3 {
                    aj[r][k] = (0..3).map(|m| a[r][m] * j[m][k]).sum();
                }
            }
            for r in 0..3 {
                for k in 0..3 {
                    a[r][k] = (0..3).map(|m| j[m][r] * aj[m][k]).sum();
                }
            }
        }
    }
    [a[0][0], a[1][1], a[2][2]]
}

/// Largest λ with `A x = λ B x`, `B` symmetric positive definite.
pub(crate) fn max_generalized_eigenvalue<T: Scalar>(a: Mat3<T>, b: Mat3<T>) -> T {
    // B = L Lᵀ
    let mut l = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s = b[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<T>();
            l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
        }
    }
    // C = L⁻¹ A L⁻ᵀ, column by column
    let lsolve = |v: [T; 3]| {
        let mut y = [T::zero(); 3];
        for i in 0..3 {
            y[i] = (v[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<T>()) / l[i][i];
        }
        y
    };
    let mut x = [[T::zero(); 3]; 3];
    for c in 0..3 {
        let y = lsolve([a[0][c], a[1][c], a[2][c]]);
        for r in 0..3 {
            x[r][c] = y[r];
        }
    }
    let mut c = [[T::zero(); 3]; 3];
    for r in 0..3 {
        let y = lsolve(x[r]);
        c[r] = y;
    }
    let sym = [
        [c[0][0], (c[0][1] + c[1][0]) / lit(2.0), (c[0][2] + c[2][0]) / lit(2.0)],
        [(c[0][1] + c[1][0]) / lit(2.0), c[1][1], (c[1][2] + c[2][1]) / lit(2.0)],
        [(c[0][2] + c[2][0]) / lit(2.0), (c[1][2] + c[2][1]) / lit(2.0), c[2][2]],
    ];
    symmetric_eigenvalues(sym).into_iter().fold(T::neg_infinity(), T::max)
}

pub fn reference_constants<T: Scalar>() -> ReferenceConstants<T> {
    let tri = reference_triangle::<T>();
    let mass = weighted_mass(&tri, 2, |_| T::one());
    let bubble_mass = weighted_mass(&tri, 6, bubble);
    let (g, area) = p1_gradients(&tri);
    let mut stiff = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            stiff[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    // sup q(v_i)² / qᵀMq = (M⁻¹)_ii
    let inf2 = (0..3)
        .map(|i| {
            let mut e = [T::zero(); 3];
            e[i] = T::one();
            solve3(mass, e).expect("reference mass matrix is regular")[i]
        })
        .fold(T::zero(), T::max);
    ReferenceConstants {
        c_norm: max_generalized_eigenvalue(mass, bubble_mass).sqrt(),
        c_inf: (area * inf2).sqrt(),
        c_inv: max_generalized_eigenvalue(stiff, mass).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bubble_peaks_at_barycenter() {
        let third: f64 = 1.0 / 3.0;
        assert!((bubble([third, third, third]) - 1.0 / 27.0).abs() < 1e-16);
        assert_eq!(bubble([0.0, 0.4, 0.6]), 0.0);
    }

    #[test]
    fn reference_triangle_has_unit_diameter() {
        let t = reference_triangle::<f64>();
        let d = ((t[1][0] - t[2][0]).powi(2) + (t[1][1] - t[2][1]).powi(2)).sqrt();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let a = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        let mut ev = symmetric_eigenvalues(a);
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s = 2f64.sqrt();
        for (x, y) in ev.iter().zip([2.0 - s, 2.0, 2.0 + s]) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn constants_are_consistent() {
        let c = reference_constants::<f64>();
        assert!(c.c_norm >= 1.0 && c.c_inf > 0.0 && c.c_inv > 0.0);
        let c32 = reference_constants::<f32>();
        assert!((c32.c_norm as f64 - c.c_norm).abs() < 1e-3 * c.c_norm);
    }
}
