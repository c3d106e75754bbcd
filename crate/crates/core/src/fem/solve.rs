//! Preconditioned conjugate gradients and the discrete state solve.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

use super::assemble::{assemble_volume_load, FeFunction};
use super::sparse::SparseMatrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of a CG solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients on an abstract SPD operator,
/// starting from the given initial guess. Convergence is measured by the
/// true relative residual ||b - A x|| / ||b||. Operator applications may
/// fail (e.g. nested inner solves); their errors propagate.
pub fn pcg<A, P>(
    apply_a: A,
    apply_pinv: P,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; b.len()],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut x = x0.to_vec();
    let mut r = b.to_vec();
    if x0.iter().any(|&v| v != 0.0) {
        let ax = apply_a(&x)?;
        for (ri, ai) in r.iter_mut().zip(&ax) {
            *ri -= ai;
        }
    }
    let mut rel = norm(&r) / b_norm;
    if rel <= tol {
        return Ok(CgSolution {
            x,
            iterations: 0,
            relative_residual: rel,
        });
    }
    let z0 = apply_pinv(&r)?;
    let mut p = z0.clone();
    let mut rz = dot(&r, &z0);
    for it in 1..=max_iter {
        let ap = apply_a(&p)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Convergence(format!(
                "operator not positive definite (p^T A p = {pap} at iteration {it})"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rel = norm(&r) / b_norm;
        if rel <= tol {
            // Confirm with the true residual; the recurrence can drift.
            let ax = apply_a(&x)?;
            let mut true_r = b.to_vec();
            for (ri, ai) in true_r.iter_mut().zip(&ax) {
                *ri -= ai;
            }
            let true_rel = norm(&true_r) / b_norm;
            if true_rel <= tol {
                return Ok(CgSolution {
                    x,
                    iterations: it,
                    relative_residual: true_rel,
                });
            }
            r = true_r;
            rel = true_rel;
        }
        let z = apply_pinv(&r)?;
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rz = rz_next;
    }
    Err(Error::Convergence(format!(
        "CG reached the iteration cap {max_iter} with relative residual {rel:.3e}"
    )))
}

/// Solves A x = b for a symmetric positive definite sparse matrix with
/// Jacobi-preconditioned CG from a zero initial guess. The iteration cap
/// is 10 n.
pub fn solve_spd(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<CgSolution> {
    debug_assert_eq!(a.n_rows, a.n_cols);
    let diag = a.diag();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Convergence(
            "matrix has a non-positive diagonal entry".into(),
        ));
    }
    let inv_diag: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();
    let x0 = vec![0.0; b.len()];
    pcg(
        |x| Ok(a.apply_vec(x)),
        |r| Ok(r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect()),
        b,
        &x0,
        tol,
        10 * a.n_rows.max(1),
    )
}

/// Solves the discrete state equation A u = F(f) + g_load, where A is the
/// assembled system matrix, F(f) the volume load of `f` and `g_load` a
/// pre-assembled boundary load (so callers can combine control and fixed
/// boundary data). For data generated by an exact solution with natural
/// boundary conditions this computes its Ritz projection.
pub fn solve_state<F>(
    mesh: &Mesh,
    system: &SparseMatrix,
    f: &F,
    g_load: &[f64],
    degree: usize,
    tol: f64,
) -> Result<(FeFunction, CgSolution)>
where
    F: Fn([f64; 3]) -> f64 + ?Sized,
{
    let mut rhs = assemble_volume_load(mesh, f, degree)?;
    debug_assert_eq!(g_load.len(), rhs.len());
    for (r, g) in rhs.iter_mut().zip(g_load) {
        *r += g;
    }
    let sol = solve_spd(system, &rhs, tol)?;
    Ok((FeFunction::new(mesh, sol.x.clone()), sol))
}
