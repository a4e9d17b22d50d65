use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::{barycentric, Triangulation};
use crate::scalar::{Point, Scalar};

/// Continuous piecewise-linear function given by its nodal values.
#[derive(Clone, Debug)]
pub struct FeFunction<'m, T> {
    mesh: &'m Triangulation<T>,
    values: Vec<T>,
}

impl<'m, T: Scalar> FeFunction<'m, T> {
    pub fn new(mesh: &'m Triangulation<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "{} nodal values for a mesh with {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: &'m Triangulation<T>) -> Self {
        Self { mesh, values: vec![T::zero(); mesh.num_vertices()] }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &'m Triangulation<T>, f: impl Fn(Point<T>) -> T) -> Self {
        Self { mesh, values: mesh.vertices().iter().map(|&p| f(p)).collect() }
    }

    /// Hat function of vertex `v`.
    pub fn hat(mesh: &'m Triangulation<T>, v: usize) -> Self {
        let mut f = Self::zeros(mesh);
        f.values[v] = T::one();
        f
    }

    pub fn mesh(&self) -> &'m Triangulation<T> {
        self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn eval(&self, p: Point<T>) -> T {
        let e = self.mesh.locate(p);
        let b = barycentric(&self.mesh.element_points(e), p);
        let el = self.mesh.element(e);
        (0..3).map(|i| b[i] * self.values[el[i]]).sum()
    }

    /// Whether all boundary values vanish.
    pub fn is_homogeneous(&self) -> bool {
        self.values
            .iter()
            .zip(self.mesh.boundary_flags())
            .all(|(&v, &b)| !b || v == T::zero())
    }

    /// Text dump, one `vertex_index value` line per vertex.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i} {v}")?;
        }
        Ok(())
    }
}

/// Numbering of the interior vertices of a mesh as unknowns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    to_dof: Vec<Option<usize>>,
    to_vertex: Vec<usize>,
}

impl DofMap {
    pub fn interior<T: Scalar>(mesh: &Triangulation<T>) -> Self {
        Self::from_vertices(mesh.num_vertices(), mesh.interior_vertices())
    }

    /// Unknowns for the given vertices, numbered in the given order.
    pub fn from_vertices(num_vertices: usize, vertices: Vec<usize>) -> Self {
        let mut to_dof = vec![None; num_vertices];
        for (k, &v) in vertices.iter().enumerate() {
            to_dof[v] = Some(k);
        }
        Self { to_dof, to_vertex: vertices }
    }

    pub fn len(&self) -> usize {
        self.to_vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_vertex.is_empty()
    }

    pub fn dof(&self, vertex: usize) -> Option<usize> {
        self.to_dof[vertex]
    }

    pub fn vertices(&self) -> &[usize] {
        &self.to_vertex
    }

    pub fn restrict<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.to_vertex.iter().map(|&v| full[v]).collect()
    }

    /// Extends unknown values by zero to all vertices.
    pub fn extend<T: Scalar>(&self, dofs: &[T]) -> Vec<T> {
        let mut full = vec![T::zero(); self.to_dof.len()];
        for (&v, &x) in self.to_vertex.iter().zip(dofs) {
            full[v] = x;
        }
        full
    }
}
