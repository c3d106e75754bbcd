//! The discrete reduced optimal control problem.
//!
//! With A the P1 system matrix, M the mass matrix, N the control-to-load
//! coupling and M_Q the control Gram matrix, the reduced cost
//!
//! ```text
//!   j(q) = 1/2 ||u(q) - u_d||^2 + alpha/2 ||q||^2_{dOmega},
//!   A u(q) = N q + F + G,
//! ```
//!
//! has gradient `alpha M_Q q + N^T z(q)` with `A z = M u - l_d`, and the
//! reduced Hessian
//!
//! ```text
//!   H = alpha M_Q + N^T A^{-1} M A^{-1} N,
//! ```
//!
//! which is symmetric positive definite. The optimal control solves
//! `H q = b` with `b = N^T A^{-1} (l_d - M A^{-1}(F + G))`; an outer CG
//! preconditioned by M_Q solves it matrix-free, with every application of
//! `A^{-1}` delegated to the Jacobi-preconditioned inner CG.

use crate::controls::{
    build_space, coupling, gram, ControlFunction, ControlSpace, ControlSpaceKind,
};
use crate::error::{Error, Result};
use crate::fem::assemble::{assemble_mass, assemble_stiffness, assemble_volume_load, FeFunction};
use crate::fem::assemble_boundary_load;
use crate::fem::norms::l2_error_volume;
use crate::fem::solve::{dot, pcg, solve_spd};
use crate::fem::sparse::SparseMatrix;
use crate::mesh::Mesh;

/// Iteration cap for the outer reduced-Hessian CG.
const OUTER_ITER_CAP: usize = 2000;

/// Assembled operators and data of one discrete control problem.
pub struct OcpProblem<'a> {
    pub mesh: &'a Mesh,
    pub space: ControlSpace,
    pub alpha: f64,
    /// A = K + M.
    pub system: SparseMatrix,
    /// Mass matrix M.
    pub mass: SparseMatrix,
    /// Control Gram matrix M_Q.
    pub gram: SparseMatrix,
    /// Coupling N (volume dofs x control dofs).
    pub coupling: SparseMatrix,
    /// Volume load F of the fixed source f.
    pub load_f: Vec<f64>,
    /// Boundary load G of the fixed boundary data g.
    pub load_g: Vec<f64>,
    /// Desired-state load l_d with entries (u_d, phi_i).
    pub desired_load: Vec<f64>,
    /// Quadrature degree used for data loads and cost evaluation.
    pub data_degree: usize,
    /// Relative tolerance of the inner solves with A and M_Q.
    pub tol_inner: f64,
    u_d: &'a (dyn Fn([f64; 3]) -> f64 + Sync),
}

/// Solution bundle of [`OcpProblem::solve_ocp`].
pub struct OcpSolution {
    pub control: ControlFunction,
    pub state: FeFunction,
    pub adjoint: FeFunction,
    pub cost: f64,
    /// ||alpha M_Q q + N^T z|| at the returned control.
    pub kkt_residual: f64,
    pub outer_iterations: usize,
}

impl<'a> OcpProblem<'a> {
    /// Assembles all operators for a mesh, control space and data set.
    /// Matrices are built once and shared by every subsequent solve.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble<F, G>(
        mesh: &'a Mesh,
        kind: ControlSpaceKind,
        alpha: f64,
        f: &F,
        g: &G,
        u_d: &'a (dyn Fn([f64; 3]) -> f64 + Sync),
        data_degree: usize,
        tol_inner: f64,
    ) -> Result<OcpProblem<'a>>
    where
        F: Fn([f64; 3]) -> f64 + ?Sized,
        G: Fn([f64; 3]) -> f64 + ?Sized,
    {
        if alpha <= 0.0 {
            return Err(Error::Config(format!(
                "regularization weight alpha must be positive, got {alpha}"
            )));
        }
        let stiffness = assemble_stiffness(mesh)?;
        let mass = assemble_mass(mesh)?;
        let system = stiffness.add(&mass)?;
        let space = build_space(mesh, kind);
        let gram = gram(mesh, &space);
        let coupling = coupling(mesh, &space);
        let load_f = assemble_volume_load(mesh, f, data_degree)?;
        let load_g = assemble_boundary_load(mesh, g, data_degree)?;
        let desired_load = assemble_volume_load(mesh, u_d, data_degree)?;
        Ok(OcpProblem {
            mesh,
            space,
            alpha,
            system,
            mass,
            gram,
            coupling,
            load_f,
            load_g,
            desired_load,
            data_degree,
            tol_inner,
            u_d,
        })
    }

    fn solve_system(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(solve_spd(&self.system, rhs, self.tol_inner)?.x)
    }

    fn solve_gram(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(solve_spd(&self.gram, rhs, self.tol_inner)?.x)
    }

    /// State u(q): solves A u = N q + F + G.
    pub fn state_of(&self, q: &ControlFunction) -> Result<FeFunction> {
        let mut rhs = self.coupling.apply_vec(&q.coefficients);
        for ((r, f), g) in rhs.iter_mut().zip(&self.load_f).zip(&self.load_g) {
            *r += f + g;
        }
        Ok(FeFunction::new(self.mesh, self.solve_system(&rhs)?))
    }

    /// Adjoint z(u): solves A z = M u - l_d.
    pub fn adjoint_of(&self, u: &FeFunction) -> Result<FeFunction> {
        let mut rhs = self.mass.apply_vec(&u.coefficients);
        for (r, l) in rhs.iter_mut().zip(&self.desired_load) {
            *r -= l;
        }
        Ok(FeFunction::new(self.mesh, self.solve_system(&rhs)?))
    }

    /// Reduced gradient alpha M_Q q + N^T z(u(q)).
    pub fn reduced_gradient(&self, q: &ControlFunction) -> Result<Vec<f64>> {
        let u = self.state_of(q)?;
        let z = self.adjoint_of(&u)?;
        let mut grad = self.gram.apply_vec(&q.coefficients);
        for g in grad.iter_mut() {
            *g *= self.alpha;
        }
        let nt_z = self.coupling.apply_transpose_vec(&z.coefficients);
        for (g, n) in grad.iter_mut().zip(&nt_z) {
            *g += n;
        }
        Ok(grad)
    }

    /// Reduced Hessian application H d (two inner solves with A).
    pub fn apply_reduced_hessian(&self, d: &[f64]) -> Result<Vec<f64>> {
        let nd = self.coupling.apply_vec(d);
        let du = self.solve_system(&nd)?;
        let mdu = self.mass.apply_vec(&du);
        let dz = self.solve_system(&mdu)?;
        let mut hd = self.coupling.apply_transpose_vec(&dz);
        let mq_d = self.gram.apply_vec(d);
        for (h, m) in hd.iter_mut().zip(&mq_d) {
            *h += self.alpha * m;
        }
        Ok(hd)
    }

    /// Right-hand side b = N^T A^{-1} (l_d - M A^{-1}(F + G)) of the
    /// reduced normal equations.
    pub fn reduced_rhs(&self) -> Result<Vec<f64>> {
        let mut fg = self.load_f.clone();
        for (r, g) in fg.iter_mut().zip(&self.load_g) {
            *r += g;
        }
        let u0 = self.solve_system(&fg)?;
        let mut rhs = self.desired_load.clone();
        let mu0 = self.mass.apply_vec(&u0);
        for (r, m) in rhs.iter_mut().zip(&mu0) {
            *r -= m;
        }
        let w = self.solve_system(&rhs)?;
        Ok(self.coupling.apply_transpose_vec(&w))
    }

    /// Solves the reduced problem H q = b by M_Q-preconditioned CG from
    /// the given start, then reports state, adjoint, cost and the KKT
    /// residual at the computed control.
    pub fn solve_ocp_from(&self, q0: &[f64], tol_outer: f64) -> Result<OcpSolution> {
        let b = self.reduced_rhs()?;
        let sol = pcg(
            |d| self.apply_reduced_hessian(d),
            |r| self.solve_gram(r),
            &b,
            q0,
            tol_outer,
            OUTER_ITER_CAP,
        )
        .map_err(|e| match e {
            Error::Convergence(msg) => Error::Convergence(format!("outer CG: {msg}")),
            other => other,
        })?;
        let control = ControlFunction::new(&self.space, sol.x);
        let state = self.state_of(&control)?;
        let adjoint = self.adjoint_of(&state)?;
        let mut kkt = self.gram.apply_vec(&control.coefficients);
        for k in kkt.iter_mut() {
            *k *= self.alpha;
        }
        let ntz = self.coupling.apply_transpose_vec(&adjoint.coefficients);
        for (k, n) in kkt.iter_mut().zip(&ntz) {
            *k += n;
        }
        let kkt_residual = dot(&kkt, &kkt).sqrt();
        let cost = self.eval_cost(&control)?;
        Ok(OcpSolution {
            control,
            state,
            adjoint,
            cost,
            kkt_residual,
            outer_iterations: sol.iterations,
        })
    }

    /// Solves the reduced problem from a zero initial control.
    pub fn solve_ocp(&self, tol_outer: f64) -> Result<OcpSolution> {
        let q0 = vec![0.0; self.space.dof_count];
        self.solve_ocp_from(&q0, tol_outer)
    }

    /// Reduced cost j(q) = 1/2 ||u(q) - u_d||^2 + alpha/2 q^T M_Q q.
    /// The tracking term integrates the u_d field with the same
    /// quadrature degree used for its load vector, so cost and gradient
    /// are exactly consistent.
    pub fn eval_cost(&self, q: &ControlFunction) -> Result<f64> {
        let u = self.state_of(q)?;
        let track = l2_error_volume(self.mesh, &u, self.u_d, self.data_degree)?;
        let mq = self.gram.apply_vec(&q.coefficients);
        let reg = dot(&mq, &q.coefficients);
        Ok(0.5 * track * track + 0.5 * self.alpha * reg)
    }
}
