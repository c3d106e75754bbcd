//! P1 tetrahedral finite elements and Neumann boundary-control studies on
//! prism domains with a singular edge.
//!
//! The library solves the linear-quadratic optimal control problem
//!
//! ```text
//!   min  1/2 ||u - u_d||^2_{L2(Omega)} + alpha/2 ||q||^2_{L2(dOmega)}
//!   s.t. -Laplace(u) + u = f  in Omega,    du/dn = q + g  on dOmega
//! ```
//!
//! on the prisms `Omega_omega = (unit-box sector of angle omega) x (0,1)`
//! for `omega` in `{pi/2, 2pi/3, 3pi/4}`, with the control discretized
//! either by piecewise constants on boundary faces or by traces of the
//! volume P1 space. A closed-form reference solution with the expected
//! `r^lambda` edge behaviour (`lambda = pi/omega`) drives convergence-rate
//! studies for the control, the state, and the boundary trace of the
//! Ritz projection.
//!
//! Modules follow the pipeline: [`mesh`] builds structured tetrahedral
//! meshes, [`fem`] assembles and solves the P1 systems, [`controls`]
//! provides the two boundary control spaces, [`ocp`] solves the reduced
//! optimal control problem, [`manufactured`] supplies the reference
//! solution with self-verification, and [`harness`] orchestrates studies
//! and CSV output.

// Plain index loops over small fixed-size element arrays read better
// than iterator chains in the assembly kernels.
#![allow(clippy::needless_range_loop)]

pub mod controls;
pub mod error;
pub mod fem;
pub mod harness;
pub mod manufactured;
pub mod mesh;
pub mod ocp;

pub use error::{Error, Result};
