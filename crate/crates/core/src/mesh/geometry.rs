//! Sign-changing interface descriptions and small polygon utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Point, Scalar};

/// Which subdomain a point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Ω₋, where the coefficient is negative.
    Minus,
    /// Ω₊, where the coefficient is positive.
    Plus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InterfaceKind<T> {
    /// Horizontal line `x₂ = height`.
    Flat { height: T },
    /// Axis-aligned rectangle `[min, max]`.
    Rectangle { min: Point<T>, max: Point<T> },
    /// Disk of given center and radius.
    Disk { center: Point<T>, radius: T },
    /// Periodic pattern: one axis-aligned square per `period`-cell. `offset` and `size`
    /// are fractions of the period.
    Checker { period: T, offset: Point<T>, size: T },
}

/// Interface Γ together with the rule assigning Ω₋ and Ω₊.
///
/// With `flipped == false` the minus side is the region above a flat line, or the
/// inside of a rectangle, disk, or checker inclusion.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceGeometry<T> {
    pub kind: InterfaceKind<T>,
    pub flipped: bool,
}

impl<T: Scalar> InterfaceGeometry<T> {
    pub fn flat(height: T) -> Result<Self> {
        Self::new(InterfaceKind::Flat { height }, false)
    }

    pub fn rectangle(min: Point<T>, max: Point<T>) -> Result<Self> {
        Self::new(InterfaceKind::Rectangle { min, max }, false)
    }

    pub fn disk(center: Point<T>, radius: T) -> Result<Self> {
        Self::new(InterfaceKind::Disk { center, radius }, false)
    }

    pub fn checker(period: T, offset: Point<T>, size: T) -> Result<Self> {
        Self::new(InterfaceKind::Checker { period, offset, size }, false)
    }

    pub fn new(kind: InterfaceKind<T>, flipped: bool) -> Result<Self> {
        let zero = T::zero();
        let one = T::one();
        match &kind {
            InterfaceKind::Flat { height } => {
                if !(*height > zero && *height < one) {
                    return Err(Error::InvalidArgument(format!(
                        "flat interface height {height} must lie in (0, 1)"
                    )));
                }
            }
            InterfaceKind::Rectangle { min, max } => {
                if !(min[0] < max[0] && min[1] < max[1]) {
                    return Err(Error::InvalidArgument("degenerate rectangle".into()));
                }
            }
            InterfaceKind::Disk { center, radius } => {
                let inside = *radius > zero
                    && center[0] - *radius > zero
                    && center[0] + *radius < one
                    && center[1] - *radius > zero
                    && center[1] + *radius < one;
                if !inside {
                    return Err(Error::InvalidArgument(
                        "disk must lie strictly inside the unit square".into(),
                    ));
                }
            }
            InterfaceKind::Checker { period, offset, size } => {
                let ok = *period > zero
                    && *size > zero
                    && offset[0] >= zero
                    && offset[1] >= zero
                    && offset[0] + *size <= one
                    && offset[1] + *size <= one;
                if !ok {
                    return Err(Error::InvalidArgument("invalid checker pattern".into()));
                }
            }
        }
        Ok(Self { kind, flipped })
    }

    pub fn with_flipped(mut self, flipped: bool) -> Self {
        self.flipped = flipped;
        self
    }

    pub fn flat_height(&self) -> Option<T> {
        match self.kind {
            InterfaceKind::Flat { height } => Some(height),
            _ => None,
        }
    }

    /// Signed "level" of a point: negative on the inner side, positive on the outer side,
    /// |value| roughly the distance to Γ.
    fn level(&self, x: Point<T>) -> T {
        match &self.kind {
            // inner side of a flat interface is the upper half
            InterfaceKind::Flat { height } => *height - x[1],
            InterfaceKind::Rectangle { min, max } => box_level(x, *min, *max),
            InterfaceKind::Disk { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                (dx * dx + dy * dy).sqrt() - *radius
            }
            InterfaceKind::Checker { period, offset, size } => {
                let cx = (x[0] / *period).floor();
                let cy = (x[1] / *period).floor();
                // nearest inclusion among the cell and its neighbours
                let mut best = T::infinity();
                for di in -1..=1 {
                    for dj in -1..=1 {
                        let ox = (cx + lit(di as f64) + offset[0]) * *period;
                        let oy = (cy + lit(dj as f64) + offset[1]) * *period;
                        let w = *size * *period;
                        let l = box_level(x, [ox, oy], [ox + w, oy + w]);
                        if l < best {
                            best = l;
                        }
                    }
                }
                best
            }
        }
    }

    /// Side of `x`, or `None` when `x` lies on Γ within the geometric tolerance.
    pub fn side(&self, x: Point<T>) -> Option<Side> {
        let l = self.level(x);
        if l.abs() <= T::geometric_tol() {
            return None;
        }
        let inner = l < T::zero();
        Some(if inner != self.flipped { Side::Minus } else { Side::Plus })
    }

    /// Side of `x`, assigning points on Γ to Ω₋.
    pub fn side_or_minus(&self, x: Point<T>) -> Side {
        self.side(x).unwrap_or(Side::Minus)
    }

    pub fn on_interface(&self, x: Point<T>) -> bool {
        self.side(x).is_none()
    }

    /// Whether the closed triangle meets Γ.
    pub fn meets_triangle(&self, tri: &[Point<T>; 3]) -> bool {
        let tol = T::geometric_tol();
        match &self.kind {
            InterfaceKind::Flat { height } => {
                let lo = tri.iter().map(|p| p[1]).fold(T::infinity(), T::min);
                let hi = tri.iter().map(|p| p[1]).fold(T::neg_infinity(), T::max);
                lo <= *height + tol && *height - tol <= hi
            }
            InterfaceKind::Disk { center, radius } => {
                let far = tri
                    .iter()
                    .map(|p| dist(*p, *center))
                    .fold(T::neg_infinity(), T::max);
                let near = point_triangle_distance(*center, tri);
                near <= *radius + tol && *radius - tol <= far
            }
            InterfaceKind::Rectangle { .. } | InterfaceKind::Checker { .. } => {
                if tri.iter().any(|p| self.on_interface(*p)) {
                    return true;
                }
                let area = polygon_area(&tri[..]).abs();
                let inner = self.inner_area(tri).unwrap_or(T::zero());
                inner > tol * area && inner < area - tol * area
            }
        }
    }

    /// Exact area of `tri ∩ Ω₋` for polygonal geometries, `None` for the disk.
    pub fn minus_area(&self, tri: &[Point<T>; 3]) -> Option<T> {
        let inner = self.inner_area(tri)?;
        Some(if self.flipped {
            polygon_area(&tri[..]).abs() - inner
        } else {
            inner
        })
    }

    fn inner_area(&self, tri: &[Point<T>; 3]) -> Option<T> {
        let pieces = self.inner_pieces(tri)?;
        Some(pieces.iter().map(|p| polygon_area(p).abs()).sum())
    }

    /// Side of the inner region (above a flat line, inside a rectangle, disk or inclusion).
    pub fn inner_side(&self) -> Side {
        if self.flipped {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    /// Convex polygons whose union is `tri ∩ inner region`, for polygonal geometries.
    pub fn inner_pieces(&self, tri: &[Point<T>; 3]) -> Option<Vec<Vec<Point<T>>>> {
        let keep = |poly: Vec<Point<T>>| -> Option<Vec<Point<T>>> {
            (poly.len() >= 3 && polygon_area(&poly).abs() > T::zero()).then_some(poly)
        };
        match &self.kind {
            InterfaceKind::Flat { height } => Some(
                keep(clip_halfplane(&tri[..], [T::zero(), -T::one()], -*height))
                    .into_iter()
                    .collect(),
            ),
            InterfaceKind::Rectangle { min, max } => {
                Some(keep(box_clip(tri, *min, *max)).into_iter().collect())
            }
            InterfaceKind::Disk { .. } => None,
            InterfaceKind::Checker { period, offset, size } => {
                let (lo, hi) = bbox(&tri[..]);
                let i0 = (lo[0] / *period).floor().to_i64()? - 1;
                let i1 = (hi[0] / *period).floor().to_i64()? + 1;
                let j0 = (lo[1] / *period).floor().to_i64()? - 1;
                let j1 = (hi[1] / *period).floor().to_i64()? + 1;
                let w = *size * *period;
                let mut out = Vec::new();
                for i in i0..=i1 {
                    for j in j0..=j1 {
                        let ox = (lit::<T>(i as f64) + offset[0]) * *period;
                        let oy = (lit::<T>(j as f64) + offset[1]) * *period;
                        out.extend(keep(box_clip(tri, [ox, oy], [ox + w, oy + w])));
                    }
                }
                Some(out)
            }
        }
    }
}

fn box_level<T: Scalar>(x: Point<T>, min: Point<T>, max: Point<T>) -> T {
    let dx = (min[0] - x[0]).max(x[0] - max[0]);
    let dy = (min[1] - x[1]).max(x[1] - max[1]);
    if dx <= T::zero() && dy <= T::zero() {
        dx.max(dy)
    } else {
        let ox = dx.max(T::zero());
        let oy = dy.max(T::zero());
        (ox * ox + oy * oy).sqrt()
    }
}

fn box_clip<T: Scalar>(tri: &[Point<T>; 3], min: Point<T>, max: Point<T>) -> Vec<Point<T>> {
    let (lo, hi) = bbox(&tri[..]);
    if hi[0] <= min[0] || lo[0] >= max[0] || hi[1] <= min[1] || lo[1] >= max[1] {
        return Vec::new();
    }
    let one = T::one();
    let zero = T::zero();
    let mut poly = tri.to_vec();
    poly = clip_halfplane(&poly, [-one, zero], -min[0]);
    poly = clip_halfplane(&poly, [one, zero], max[0]);
    poly = clip_halfplane(&poly, [zero, -one], -min[1]);
    clip_halfplane(&poly, [zero, one], max[1])
}

pub(crate) fn dist<T: Scalar>(a: Point<T>, b: Point<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn point_segment_distance<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>) -> T {
    let abx = b[0] - a[0];
    let aby = b[1] - a[1];
    let len2 = abx * abx + aby * aby;
    let t = if len2 > T::zero() {
        (((p[0] - a[0]) * abx + (p[1] - a[1]) * aby) / len2)
            .max(T::zero())
            .min(T::one())
    } else {
        T::zero()
    };
    dist(p, [a[0] + t * abx, a[1] + t * aby])
}

fn point_triangle_distance<T: Scalar>(p: Point<T>, tri: &[Point<T>; 3]) -> T {
    let b = barycentric(tri, p);
    if b.iter().all(|&l| l >= T::zero()) {
        return T::zero();
    }
    (0..3)
        .map(|i| point_segment_distance(p, tri[i], tri[(i + 1) % 3]))
        .fold(T::infinity(), T::min)
}

/// Barycentric coordinates of `p` with respect to `tri`.
pub fn barycentric<T: Scalar>(tri: &[Point<T>; 3], p: Point<T>) -> [T; 3] {
    let [a, b, c] = *tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [T::one() - l1 - l2, l1, l2]
}

pub fn bbox<T: Scalar>(poly: &[Point<T>]) -> (Point<T>, Point<T>) {
    let mut lo = [T::infinity(); 2];
    let mut hi = [T::neg_infinity(); 2];
    for p in poly {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// Signed area (positive for counter-clockwise orientation).
pub fn polygon_area<T: Scalar>(poly: &[Point<T>]) -> T {
    let n = poly.len();
    if n < 3 {
        return T::zero();
    }
    let mut s = T::zero();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        s += p[0] * q[1] - q[0] * p[1];
    }
    s / lit(2.0)
}

/// Keeps the part of `poly` with `normal · x <= offset` (Sutherland–Hodgman step).
pub fn clip_halfplane<T: Scalar>(poly: &[Point<T>], normal: Point<T>, offset: T) -> Vec<Point<T>> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    if n == 0 {
        return out;
    }
    let eval = |p: &Point<T>| normal[0] * p[0] + normal[1] * p[1] - offset;
    for i in 0..n {
        let cur = poly[i];
        let nxt = poly[(i + 1) % n];
        let fc = eval(&cur);
        let fn_ = eval(&nxt);
        if fc <= T::zero() {
            out.push(cur);
        }
        if (fc < T::zero() && fn_ > T::zero()) || (fc > T::zero() && fn_ < T::zero()) {
            let t = fc / (fc - fn_);
            out.push([cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])]);
        }
    }
    out
}

/// Intersection of `poly` with a convex counter-clockwise polygon.
pub fn clip_convex<T: Scalar>(poly: &[Point<T>], clip: &[Point<T>]) -> Vec<Point<T>> {
    let mut out = poly.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        // outward normal of a ccw edge
        let normal = [b[1] - a[1], a[0] - b[0]];
        let offset = normal[0] * a[0] + normal[1] * a[1];
        out = clip_halfplane(&out, normal, offset);
    }
    out
}

/// Fan triangulation of a convex polygon.
pub fn fan_triangles<T: Scalar>(poly: &[Point<T>]) -> Vec<[Point<T>; 3]> {
    (1..poly.len().saturating_sub(1))
        .map(|i| [poly[0], poly[i], poly[i + 1]])
        .collect()
}
