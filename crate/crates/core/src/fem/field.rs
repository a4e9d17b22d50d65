//! Piecewise scalar fields and element quadrature that respects the interface.

use std::sync::Arc;

use super::QuadratureRule;
use crate::mesh::{fan_triangles, InterfaceGeometry, Side};
use crate::scalar::{Point, Scalar};

/// Function of a point and of the subdomain the point is attributed to.
pub type SideFn<T> = Arc<dyn Fn(Point<T>, Side) -> T + Send + Sync>;
/// Vector-valued counterpart of [`SideFn`].
pub type SideVecFn<T> = Arc<dyn Fn(Point<T>, Side) -> [T; 2] + Send + Sync>;

/// A quadrature point with its physical weight and the side its integrand branch uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint<T> {
    pub x: Point<T>,
    pub weight: T,
    pub side: Side,
}

/// Quadrature points on a triangle.
///
/// Without splitting, every point takes the side it lies on. With `split` and a
/// polygonal geometry, a cut triangle is integrated as the whole element with the outer
/// branch plus, on each inner piece, the inner branch minus the outer branch, so every
/// branch is only ever evaluated as a smooth function.
pub fn element_points<T: Scalar>(
    geom: Option<&InterfaceGeometry<T>>,
    tri: &[Point<T>; 3],
    rule: &QuadratureRule<T>,
    split: bool,
) -> Vec<QuadPoint<T>> {
    let area = crate::mesh::polygon_area(&tri[..]).abs();
    let Some(geom) = geom else {
        return rule
            .map(tri)
            .map(|(x, w)| QuadPoint { x, weight: w * area, side: Side::Plus })
            .collect();
    };
    let sampled = || {
        rule.map(tri)
            .map(|(x, w)| QuadPoint { x, weight: w * area, side: geom.side_or_minus(x) })
            .collect()
    };
    if !split || !geom.meets_triangle(tri) {
        return sampled();
    }
    let Some(pieces) = geom.inner_pieces(tri) else {
        return sampled();
    };
    let inner = geom.inner_side();
    let outer = match inner {
        Side::Minus => Side::Plus,
        Side::Plus => Side::Minus,
    };
    let mut out: Vec<QuadPoint<T>> = rule
        .map(tri)
        .map(|(x, w)| QuadPoint { x, weight: w * area, side: outer })
        .collect();
    for piece in pieces {
        for sub in fan_triangles(&piece) {
            let a = crate::mesh::polygon_area(&sub[..]).abs();
            for (x, w) in rule.map(&sub) {
                out.push(QuadPoint { x, weight: w * a, side: inner });
                out.push(QuadPoint { x, weight: -w * a, side: outer });
            }
        }
    }
    out
}

/// Scalar field defined branch-wise on Ω₊ and Ω₋.
#[derive(Clone)]
pub struct PiecewiseField<T> {
    geom: Option<InterfaceGeometry<T>>,
    f: SideFn<T>,
}

impl<T: std::fmt::Debug> std::fmt::Debug for PiecewiseField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PiecewiseField").field("geom", &self.geom).finish_non_exhaustive()
    }
}

impl<T: Scalar> PiecewiseField<T> {
    pub fn constant(c: T) -> Self {
        Self { geom: None, f: Arc::new(move |_, _| c) }
    }

    /// A single smooth function on all of Ω.
    pub fn smooth(f: impl Fn(Point<T>) -> T + Send + Sync + 'static) -> Self {
        Self { geom: None, f: Arc::new(move |x, _| f(x)) }
    }

    pub fn piecewise(
        geom: InterfaceGeometry<T>,
        f: impl Fn(Point<T>, Side) -> T + Send + Sync + 'static,
    ) -> Self {
        Self { geom: Some(geom), f: Arc::new(f) }
    }

    pub fn geometry(&self) -> Option<&InterfaceGeometry<T>> {
        self.geom.as_ref()
    }

    pub fn side_at(&self, x: Point<T>) -> Side {
        self.geom.as_ref().map_or(Side::Plus, |g| g.side_or_minus(x))
    }

    pub fn eval(&self, x: Point<T>) -> T {
        (self.f)(x, self.side_at(x))
    }

    pub fn eval_side(&self, x: Point<T>, side: Side) -> T {
        (self.f)(x, side)
    }

    pub fn points(&self, tri: &[Point<T>; 3], rule: &QuadratureRule<T>, split: bool) -> Vec<QuadPoint<T>> {
        element_points(self.geom.as_ref(), tri, rule, split)
    }

    /// `∫_K g(x, f(x)) dx`.
    pub fn integrate(
        &self,
        tri: &[Point<T>; 3],
        rule: &QuadratureRule<T>,
        split: bool,
        g: impl Fn(Point<T>, T) -> T,
    ) -> T {
        self.points(tri, rule, split)
            .iter()
            .map(|q| q.weight * g(q.x, (self.f)(q.x, q.side)))
            .sum()
    }
}
