//! Structured bilinear finite elements on uniform rectangular meshes:
//! meshes and nodal fields, assembly with variable matrix coefficients,
//! Dirichlet elimination and iterative sparse solvers.

mod assembly;
mod mesh;
mod solver;

pub use assembly::{
    apply_dirichlet, assemble_gradient_load, assemble_load, assemble_mass, assemble_stiffness,
    boundary_trace, project_zero_mean, Constraint, CsrMatrix, LinearSystem,
};
pub use mesh::{
    build_mesh, gradient_at_gauss, nodal_gradient, BoundaryNode, GaussVecField, GridFunction,
    Mesh, GAUSS_LOCAL,
};
pub use solver::{solve, SolveInfo, SolverConfig, SolverMethod};
