//! P1 finite elements: quadrature, coefficients, assembly, projections and norms.

mod assembly;
mod coefficient;
mod field;
mod function;
mod norms;
mod projection;
mod quadrature;

pub use assembly::{
    abs_sigma_integrals, assemble_load, assemble_mass, assemble_sigma_stiffness, element_integrals,
    element_stiffness, p1_gradients, sigma_integrals, stiffness_from_integrals,
};
pub use coefficient::{Coefficient, CoefficientBounds};
pub use field::{element_points, PiecewiseField, QuadPoint, SideFn, SideVecFn};
pub use function::{DofMap, FeFunction};
pub use norms::{error_norms_exact, fe_norms, ExactSolution, Norms};
pub use projection::{
    coupling_matrix, element_l2_projection, element_projection_weights, l2_best_approx,
    l2_best_approx_exact,
};
pub use quadrature::QuadratureRule;
