//! Localized orthogonal decomposition for diffusion problems whose coefficient changes sign.

#![allow(clippy::needless_range_loop)]

pub mod correctors;
pub mod error;
pub mod fem;
pub mod lod;
pub mod mesh;
pub mod quasi_interp;
pub mod scalar;
pub mod scenarios;
pub mod sparse_linalg;
pub mod tcoercivity;

pub use error::{Error, Result};
pub use scalar::{Point, Scalar};

pub type Mesh = mesh::Triangulation<f64>;
pub type Geometry = mesh::InterfaceGeometry<f64>;
pub type CsrMatrix = sparse_linalg::SparseMatrix<f64>;
pub type FineProblem<'h> = correctors::FineProblem<'h, f64>;
pub type LodSolution = lod::LodSolution<f64>;
