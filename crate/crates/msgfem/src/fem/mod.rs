//! Finite element building blocks: shape functions, element matrices,
//! assembly, constrained SPD solves and energy products.

mod element;
mod energy;
mod field;
mod problem;
mod shape;
mod solver;
mod sparse;

pub use element::{element_stiffness, jacobian, min_jacobian, physical_gradients, ElementStiffness, GeometryCache, Operator};
pub use energy::{a_posteriori, apply_stiffness, energy, energy_product};
pub use field::NodalField;
pub use problem::{assemble_load, field_gradient, solve, BoundaryConditions, BoundaryKind, Nullspace, ScalarFn};
pub use shape::{gauss_1d, quadrature, reference_nodes, shape_eval, ShapeValues};
pub use solver::{pcg, ConstrainedSolver, SkylineCholesky, SolverMethod, SolverSettings};
pub use sparse::{assemble, CsrMatrix};
