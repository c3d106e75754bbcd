//! P1 finite-element kernel: sparse matrices, quadrature, assembly,
//! iterative solvers and error norms.

pub mod assemble;
pub mod norms;
pub mod quadrature;
pub mod solve;
pub mod sparse;

pub use assemble::{
    assemble_boundary_load, assemble_mass, assemble_stiffness, assemble_system,
    assemble_volume_load, nodal_interpolate, FeFunction,
};
pub use norms::{l2_error_boundary_fe, l2_error_boundary_with, l2_error_volume, l2_norm_boundary};
pub use quadrature::{TetQuadrature, TriQuadrature};
pub use solve::{pcg, solve_spd, solve_state, CgSolution};
pub use sparse::SparseMatrix;
