//! T-coercivity laboratory: reference constants, the symmetrization `S`, the operators
//! `T` and `T_H`, dual bubble functions and sampled coercivity probes.

mod dual;
mod operators;
mod reference;
mod symmetrization;

pub use dual::{build_discrete_dual, build_discrete_duals, build_dual_function, host_element, DiscreteDual, DualFunction};
pub use operators::{apply_t, apply_t_h, coercivity_probe, CoercivityReport};
pub use reference::{bubble, reference_constants, reference_triangle, ReferenceConstants};
pub use symmetrization::SymmetrizationMap;
