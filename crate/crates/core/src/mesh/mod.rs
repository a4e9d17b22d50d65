//! Structured block triangulations of the unit square, hierarchies, and patches.

mod geometry;
mod patch;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use geometry::{
    barycentric, bbox, clip_convex, clip_halfplane, fan_triangles, polygon_area, InterfaceGeometry,
    InterfaceKind, Side,
};
pub use patch::{
    classify_vertices, element_patch, overlap_stats, symmetric_patch, ElementSet, PatchStats,
    SymmetricPatch, VertexClasses,
};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Point, Scalar};

/// Largest supported refinement level.
pub const MAX_LEVEL: u32 = 12;

/// How each square block of the mesh is split into triangles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshPattern {
    /// Four triangles through both diagonals; the block center is a vertex.
    #[default]
    CrissCross,
    /// Two triangles through the south-west to north-east diagonal.
    NeDiagonal,
}

impl FromStr for MeshPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crisscross" | "criss-cross" => Ok(Self::CrissCross),
            "ne-diagonal" | "nediagonal" => Ok(Self::NeDiagonal),
            other => Err(Error::InvalidArgument(format!("unknown mesh pattern `{other}`"))),
        }
    }
}

impl fmt::Display for MeshPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CrissCross => "crisscross",
            Self::NeDiagonal => "ne-diagonal",
        })
    }
}

impl MeshPattern {
    pub fn triangles_per_block(self) -> usize {
        match self {
            Self::CrissCross => 4,
            Self::NeDiagonal => 2,
        }
    }
}

/// Conforming triangulation of [0,1]² built from 2^level × 2^level square blocks.
#[derive(Clone, Debug)]
pub struct Triangulation<T> {
    vertices: Vec<Point<T>>,
    elements: Vec<[usize; 3]>,
    level: u32,
    pattern: MeshPattern,
    boundary: Vec<bool>,
    /// Neighbour across the edge opposite local vertex `i`.
    neighbors: Vec<[Option<usize>; 3]>,
    vertex_elements: Vec<Vec<usize>>,
    parent_map: Option<Vec<usize>>,
    on_coarse_edge: Option<Vec<bool>>,
}

pub fn build_block_mesh<T: Scalar>(level: u32) -> Result<Triangulation<T>> {
    Triangulation::block(level, MeshPattern::CrissCross)
}

/// Refines a block mesh by `extra_levels` dyadic levels and records the parent map.
pub fn refine<T: Scalar>(coarse: &Triangulation<T>, extra_levels: u32) -> Result<Triangulation<T>> {
    if extra_levels < 1 {
        return Err(Error::InvalidArgument("refine needs at least one extra level".into()));
    }
    let mut fine = Triangulation::block(coarse.level + extra_levels, coarse.pattern)?;
    let parents = (0..fine.num_elements())
        .map(|e| coarse.locate(fine.centroid(e)))
        .collect();
    let tol = T::geometric_tol();
    let on_edge = fine
        .vertices
        .iter()
        .map(|&p| {
            let k = coarse.locate(p);
            let b = barycentric(&coarse.element_points(k), p);
            b.iter().any(|l| l.abs() <= tol)
        })
        .collect();
    fine.parent_map = Some(parents);
    fine.on_coarse_edge = Some(on_edge);
    Ok(fine)
}

impl<T: Scalar> Triangulation<T> {
    pub fn block(level: u32, pattern: MeshPattern) -> Result<Self> {
        if !(1..=MAX_LEVEL).contains(&level) {
            return Err(Error::LevelOutOfRange { level, max: MAX_LEVEL });
        }
        let n = 1usize << level;
        let h = T::one() / from_usize::<T>(n);
        let grid = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([from_usize::<T>(i) * h, from_usize::<T>(j) * h]);
            }
        }
        let mut elements = Vec::with_capacity(n * n * pattern.triangles_per_block());
        let half = lit::<T>(0.5);
        match pattern {
            MeshPattern::CrissCross => {
                let base = vertices.len();
                for j in 0..n {
                    for i in 0..n {
                        vertices.push([
                            (from_usize::<T>(i) + half) * h,
                            (from_usize::<T>(j) + half) * h,
                        ]);
                    }
                }
                for j in 0..n {
                    for i in 0..n {
                        let c = base + j * n + i;
                        let (v00, v10) = (grid(i, j), grid(i + 1, j));
                        let (v01, v11) = (grid(i, j + 1), grid(i + 1, j + 1));
                        elements.push([v00, v10, c]);
                        elements.push([v10, v11, c]);
                        elements.push([v11, v01, c]);
                        elements.push([v01, v00, c]);
                    }
                }
            }
            MeshPattern::NeDiagonal => {
                for j in 0..n {
                    for i in 0..n {
                        let (v00, v10) = (grid(i, j), grid(i + 1, j));
                        let (v01, v11) = (grid(i, j + 1), grid(i + 1, j + 1));
                        elements.push([v00, v10, v11]);
                        elements.push([v00, v11, v01]);
                    }
                }
            }
        }
        let one = T::one();
        let boundary = vertices
            .iter()
            .map(|p| p[0] == T::zero() || p[1] == T::zero() || p[0] == one || p[1] == one)
            .collect();
        let mut mesh = Self {
            vertices,
            elements,
            level,
            pattern,
            boundary,
            neighbors: Vec::new(),
            vertex_elements: Vec::new(),
            parent_map: None,
            on_coarse_edge: None,
        };
        mesh.build_adjacency();
        for e in 0..mesh.num_elements() {
            if mesh.signed_area(e) <= T::zero() {
                return Err(Error::NonPositiveArea { element: e });
            }
        }
        Ok(mesh)
    }

    fn build_adjacency(&mut self) {
        let mut vertex_elements = vec![Vec::new(); self.vertices.len()];
        for (e, el) in self.elements.iter().enumerate() {
            for &v in el {
                vertex_elements[v].push(e);
            }
        }
        let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut neighbors = vec![[None; 3]; self.elements.len()];
        for (e, el) in self.elements.iter().enumerate() {
            for i in 0..3 {
                let a = el[(i + 1) % 3];
                let b = el[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                if let Some((other, oi)) = edges.remove(&key) {
                    neighbors[e][i] = Some(other);
                    neighbors[other][oi] = Some(e);
                } else {
                    edges.insert(key, (e, i));
                }
            }
        }
        self.vertex_elements = vertex_elements;
        self.neighbors = neighbors;
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn pattern(&self) -> MeshPattern {
        self.pattern
    }

    /// Blocks per side, `2^level`.
    pub fn blocks_per_side(&self) -> usize {
        1 << self.level
    }

    /// Block side length `2^-level`.
    pub fn block_size(&self) -> T {
        T::one() / from_usize::<T>(self.blocks_per_side())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point<T> {
        self.vertices[v]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn element_points(&self, e: usize) -> [Point<T>; 3] {
        let [a, b, c] = self.elements[e];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn element_neighbors(&self, e: usize) -> [Option<usize>; 3] {
        self.neighbors[e]
    }

    pub fn vertex_elements(&self, v: usize) -> &[usize] {
        &self.vertex_elements[v]
    }

    /// For a refined mesh: the coarse ancestor of each element.
    pub fn parent_map(&self) -> Option<&[usize]> {
        self.parent_map.as_deref()
    }

    /// For a refined mesh: whether each vertex lies on an edge of the coarse mesh.
    pub fn on_coarse_edge(&self) -> Option<&[bool]> {
        self.on_coarse_edge.as_deref()
    }

    pub fn signed_area(&self, e: usize) -> T {
        let [a, b, c] = self.element_points(e);
        ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) * lit(0.5)
    }

    pub fn area(&self, e: usize) -> T {
        self.signed_area(e).abs()
    }

    pub fn centroid(&self, e: usize) -> Point<T> {
        let [a, b, c] = self.element_points(e);
        let third = lit::<T>(1.0 / 3.0);
        [(a[0] + b[0] + c[0]) * third, (a[1] + b[1] + c[1]) * third]
    }

    /// Diameter `H_K` (longest edge).
    pub fn diameter(&self, e: usize) -> T {
        let p = self.element_points(e);
        (0..3)
            .map(|i| geometry::dist(p[i], p[(i + 1) % 3]))
            .fold(T::zero(), T::max)
    }

    /// Inradius `ρ_K`.
    pub fn inradius(&self, e: usize) -> T {
        let p = self.element_points(e);
        let perimeter: T = (0..3).map(|i| geometry::dist(p[i], p[(i + 1) % 3])).sum();
        lit::<T>(2.0) * self.area(e) / perimeter
    }

    /// Shape-regularity constant `max_K H_K / ρ_K`.
    pub fn shape_regularity(&self) -> T {
        (0..self.num_elements())
            .map(|e| self.diameter(e) / self.inradius(e))
            .fold(T::zero(), T::max)
    }

    /// Index of an element containing `p` (points on shared edges resolve to one of them).
    pub fn locate(&self, p: Point<T>) -> usize {
        let n = self.blocks_per_side();
        let nf = from_usize::<T>(n);
        let cell = |x: T| -> (usize, T) {
            let s = x * nf;
            let i = s.floor().to_usize().unwrap_or(0).min(n - 1);
            (i, s - from_usize::<T>(i))
        };
        let (i, s) = cell(p[0]);
        let (j, t) = cell(p[1]);
        let block = j * n + i;
        let one = T::one();
        match self.pattern {
            MeshPattern::CrissCross => {
                let local = if t <= s && t <= one - s {
                    0
                } else if s >= t && s >= one - t {
                    1
                } else if t >= s && t >= one - s {
                    2
                } else {
                    3
                };
                4 * block + local
            }
            MeshPattern::NeDiagonal => 2 * block + usize::from(t > s),
        }
    }

    /// Vertex located at `p`, if any.
    pub fn vertex_at(&self, p: Point<T>) -> Option<usize> {
        let n = self.blocks_per_side();
        let nf = from_usize::<T>(n);
        let tol = T::geometric_tol() * nf;
        let snap = |x: T| -> Option<usize> {
            let r = x.round();
            if (x - r).abs() <= tol && r >= T::zero() {
                r.to_usize()
            } else {
                None
            }
        };
        let (x, y) = (p[0] * nf, p[1] * nf);
        if let (Some(i), Some(j)) = (snap(x), snap(y)) {
            return (i <= n && j <= n).then(|| j * (n + 1) + i);
        }
        if self.pattern == MeshPattern::CrissCross {
            let half = lit::<T>(0.5);
            if let (Some(i), Some(j)) = (snap(x - half), snap(y - half)) {
                return (i < n && j < n).then(|| (n + 1) * (n + 1) + j * n + i);
            }
        }
        None
    }

    /// Elements whose block overlaps the closed box `[lo, hi]` (a superset of the
    /// elements meeting the box).
    pub fn elements_in_box(&self, lo: Point<T>, hi: Point<T>) -> Vec<usize> {
        let n = self.blocks_per_side();
        let nf = from_usize::<T>(n);
        let tol = T::geometric_tol();
        let range = |a: T, b: T| -> (usize, usize) {
            let i0 = ((a - tol) * nf).floor().max(T::zero()).to_usize().unwrap_or(0).min(n - 1);
            let i1 = ((b + tol) * nf).floor().max(T::zero()).to_usize().unwrap_or(0).min(n - 1);
            (i0, i1)
        };
        let (i0, i1) = range(lo[0], hi[0]);
        let (j0, j1) = range(lo[1], hi[1]);
        let per = self.pattern.triangles_per_block();
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let b = j * n + i;
                out.extend(per * b..per * (b + 1));
            }
        }
        out
    }

    /// Writes `v x y` and `e i j k` lines (zero-based indices).
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.vertices {
            writeln!(out, "v {} {}", p[0], p[1])?;
        }
        for e in &self.elements {
            writeln!(out, "e {} {} {}", e[0], e[1], e[2])?;
        }
        Ok(())
    }
}

/// A coarse mesh, a refinement of it, and the element correspondence between them.
#[derive(Clone, Debug)]
pub struct Hierarchy<T> {
    pub coarse: Triangulation<T>,
    pub fine: Triangulation<T>,
    children: Vec<Vec<usize>>,
}

impl<T: Scalar> Hierarchy<T> {
    pub fn new(coarse_level: u32, fine_level: u32, pattern: MeshPattern) -> Result<Self> {
        if fine_level < coarse_level {
            return Err(Error::InvalidArgument(format!(
                "fine level {fine_level} below coarse level {coarse_level}"
            )));
        }
        let coarse = Triangulation::block(coarse_level, pattern)?;
        let fine = if fine_level == coarse_level {
            let mut f = coarse.clone();
            f.parent_map = Some((0..f.num_elements()).collect());
            f.on_coarse_edge = Some(vec![true; f.num_vertices()]);
            f
        } else {
            refine(&coarse, fine_level - coarse_level)?
        };
        Ok(Self::from_meshes(coarse, fine))
    }

    /// Builds the hierarchy from a coarse mesh and a refinement carrying a parent map.
    pub fn from_meshes(coarse: Triangulation<T>, fine: Triangulation<T>) -> Self {
        let parents = fine.parent_map().expect("fine mesh carries a parent map");
        let mut children = vec![Vec::new(); coarse.num_elements()];
        for (f, &p) in parents.iter().enumerate() {
            children[p].push(f);
        }
        Self { coarse, fine, children }
    }

    pub fn parent(&self, fine_element: usize) -> usize {
        self.fine.parent_map().expect("hierarchy fine mesh has parents")[fine_element]
    }

    pub fn children(&self, coarse_element: usize) -> &[usize] {
        &self.children[coarse_element]
    }

    /// Fine vertices lying in the closure of a coarse element.
    pub fn fine_vertices_of(&self, coarse_element: usize) -> Vec<usize> {
        let mut vs: Vec<usize> = self.children[coarse_element]
            .iter()
            .flat_map(|&f| self.fine.element(f))
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Coarse-to-fine injection of a nodal vector (exact for P1 on nested meshes).
    pub fn inject(&self, coarse_values: &[T]) -> Vec<T> {
        self.fine
            .vertices()
            .iter()
            .map(|&p| {
                let k = self.coarse.locate(p);
                let b = barycentric(&self.coarse.element_points(k), p);
                let el = self.coarse.element(k);
                (0..3).map(|i| b[i] * coarse_values[el[i]]).sum()
            })
            .collect()
    }

    /// Fine nodal representation of the coarse hat function at `vertex`.
    pub fn inject_hat(&self, vertex: usize) -> Vec<(usize, T)> {
        let mut out = Vec::new();
        let mut seen = std::collections::BTreeMap::new();
        for &k in self.coarse.vertex_elements(vertex) {
            let pts = self.coarse.element_points(k);
            let local = self.coarse.element(k).iter().position(|&v| v == vertex).unwrap();
            for fv in self.fine_vertices_of(k) {
                let b = barycentric(&pts, self.fine.vertex(fv));
                seen.entry(fv).or_insert(b[local]);
            }
        }
        for (fv, val) in seen {
            if val.abs() > T::geometric_tol() {
                out.push((fv, val));
            }
        }
        out
    }
}
