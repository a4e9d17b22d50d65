//! Symmetric quadrature rules on triangles in barycentric coordinates.

use crate::scalar::{lit, Point, Scalar};

/// Points in barycentric coordinates with weights summing to one; the integral over a
/// triangle `K` is `|K| Σ wᵢ f(xᵢ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
    pub degree: usize,
}

fn orbit3(a: f64, b: f64) -> Vec<[f64; 3]> {
    vec![[a, b, b], [b, a, b], [b, b, a]]
}

fn orbit6(a: f64, b: f64, c: f64) -> Vec<[f64; 3]> {
    vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

fn raw_rule(degree: usize) -> (Vec<[f64; 3]>, Vec<f64>, usize) {
    let third = 1.0 / 3.0;
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    let mut add = |p: Vec<[f64; 3]>, w: f64| {
        wts.extend(std::iter::repeat_n(w, p.len()));
        pts.extend(p);
    };
    let exact = match degree {
        0 | 1 => {
            add(vec![[third; 3]], 1.0);
            1
        }
        2 => {
            add(orbit3(2.0 / 3.0, 1.0 / 6.0), third);
            2
        }
        3 | 4 => {
            add(orbit3(0.108103018168070, 0.445948490915965), 0.223381589678011);
            add(orbit3(0.816847572980459, 0.091576213509771), 0.109951743655322);
            4
        }
        5 | 6 => {
            add(orbit3(0.501426509658179, 0.249286745170910), 0.116786275726379);
            add(orbit3(0.873821971016996, 0.063089014491502), 0.050844906370207);
            add(orbit6(0.053145049844817, 0.310352451033784, 0.636502499121399), 0.082851075618374);
            6
        }
        7 | 8 => {
            add(vec![[third; 3]], 0.144315607677787);
            add(orbit3(0.081414823414554, 0.459292588292723), 0.095091634267285);
            add(orbit3(0.658861384496480, 0.170569307751760), 0.103217370534718);
            add(orbit3(0.898905543365938, 0.050547228317031), 0.032458497623198);
            add(orbit6(0.008394777409958, 0.263112829634638, 0.728492392955404), 0.027230314174435);
            8
        }
        _ => return conical_product(degree),
    };
    (pts, wts, exact)
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 + x) / 2.0, w / 2.0));
    }
    out
}

/// Collapsed tensor Gauss rule, exact for the requested degree.
fn conical_product(degree: usize) -> (Vec<[f64; 3]>, Vec<f64>, usize) {
    let n = (degree + 3) / 2;
    let g = gauss_legendre(n);
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            let l1 = u;
            let l2 = (1.0 - u) * v;
            pts.push([1.0 - l1 - l2, l1, l2]);
            // Jacobian (1 - u) and area normalization 2
            wts.push(2.0 * wu * wv * (1.0 - u));
        }
    }
    (pts, wts, 2 * n - 2)
}

impl<T: Scalar> QuadratureRule<T> {
    /// The cheapest built-in rule integrating polynomials of degree `degree` exactly.
    pub fn with_degree(degree: usize) -> Self {
        let (pts, wts, exact) = raw_rule(degree);
        Self {
            points: pts.into_iter().map(|p| p.map(lit)).collect(),
            weights: wts.into_iter().map(lit).collect(),
            degree: exact,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points of the rule on a triangle.
    pub fn map(&self, tri: &[Point<T>; 3]) -> impl Iterator<Item = (Point<T>, T)> + '_ {
        let tri = *tri;
        self.points.iter().zip(&self.weights).map(move |(b, &w)| {
            let x = tri[0][0] * b[0] + tri[1][0] * b[1] + tri[2][0] * b[2];
            let y = tri[0][1] * b[0] + tri[1][1] * b[1] + tri[2][1] * b[2];
            ([x, y], w)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫_K λ₁^a λ₂^b λ₃^c / |K| = 2 a! b! c! / (a+b+c+2)!
    fn exact(a: u32, b: u32, c: u32) -> f64 {
        2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    #[test]
    fn monomial_exactness() {
        for degree in 1..=14 {
            let rule = QuadratureRule::<f64>::with_degree(degree);
            assert!(rule.degree >= degree);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-13, "degree {degree}");
            for a in 0..=rule.degree as u32 {
                for b in 0..=(rule.degree as u32 - a) {
                    let c = rule.degree as u32 - a - b;
                    for (aa, bb, cc) in [(a, b, c), (a, b, 0), (a, 0, 0)] {
                        let q: f64 = rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(p, w)| w * p[0].powi(aa as i32) * p[1].powi(bb as i32) * p[2].powi(cc as i32))
                            .sum();
                        let e = exact(aa, bb, cc);
                        assert!((q - e).abs() < 1e-12 * e.max(1e-3), "deg {degree}: {aa},{bb},{cc}: {q} vs {e}");
                    }
                }
            }
        }
    }

    #[test]
    fn points_inside() {
        for degree in [1, 2, 4, 6, 8, 12] {
            let rule = QuadratureRule::<f64>::with_degree(degree);
            for p in &rule.points {
                assert!(p.iter().all(|&l| l > 0.0 && l < 1.0));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_precision_rule() {
        let rule = QuadratureRule::<f32>::with_degree(4);
        let s: f32 = rule.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}
