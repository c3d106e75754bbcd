//! Closed-form reference solution and derived problem data.
//!
//! The optimal state and adjoint state are chosen equal,
//!
//! ```text
//!   u(x) = z(x) = r^lambda cos(lambda*phi) eta(r) cos(pi*x3),
//! ```
//!
//! with `lambda = pi/omega`, polar coordinates `(r, phi)` of `(x1, x2)`
//! and the cutoff `eta(r) = (1+3r)(1-r)^3` on `[0,1]`, zero beyond. The
//! leading factor `r^lambda cos(lambda*phi)` is harmonic in 2D and the
//! construction has a vanishing normal derivative on every facet of the
//! prism, so with
//!
//! ```text
//!   q = -z|_{boundary},   f = -Lap(u) + u,   g = -q,   u_d = u + Lap(z) - z
//! ```
//!
//! the triple (q, u, z) satisfies the optimality system of the control
//! problem with unit regularization weight.
//!
//! Every closed-form derivative in this module is checked against finite
//! differences before a case is handed out; an algebra slip here would
//! silently corrupt every convergence study downstream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::AngleCase;

/// Opaque scalar field on the closed prism.
pub type ScalarField = Box<dyn Fn([f64; 3]) -> f64 + Send + Sync>;

/// Radial cutoff: (1+3r)(1-r)^3 on [0,1], zero for r > 1. C^1 at r = 1.
pub fn eta(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let s = 1.0 - r;
        (1.0 + 3.0 * r) * s * s * s
    }
}

/// eta'(r) = -12 r (1-r)^2 on [0,1], zero beyond.
pub fn eta_prime(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let s = 1.0 - r;
        -12.0 * r * s * s
    }
}

/// eta''(r) = -12 (1-r)(1-3r) on [0,1], zero beyond.
pub fn eta_second(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        -12.0 * (1.0 - r) * (1.0 - 3.0 * r)
    }
}

/// The optimal state u = z at a point (also the adjoint state).
pub fn exact_state(omega: AngleCase, x: [f64; 3]) -> f64 {
    let r = x[0].hypot(x[1]);
    if r >= 1.0 {
        return 0.0;
    }
    let lambda = omega.lambda();
    let phi = x[1].atan2(x[0]);
    r.powf(lambda) * (lambda * phi).cos() * eta(r) * (std::f64::consts::PI * x[2]).cos()
}

/// Laplacian of the state. Uses the harmonicity of r^lambda cos(lambda phi)
/// in 2D:
///
/// ```text
///   Lap(z) = cos(pi x3) cos(lambda phi)
///            [ (2 lambda + 1) r^(lambda-1) eta'(r) + r^lambda eta''(r) ]
///            - pi^2 z.
/// ```
///
/// Both singular terms carry r^(lambda-1) with lambda > 1, so the limit at
/// r = 0 is zero.
pub fn exact_laplacian(omega: AngleCase, x: [f64; 3]) -> f64 {
    let r = x[0].hypot(x[1]);
    if r >= 1.0 {
        return 0.0;
    }
    let lambda = omega.lambda();
    let phi = x[1].atan2(x[0]);
    let pi = std::f64::consts::PI;
    let angular = (lambda * phi).cos() * (pi * x[2]).cos();
    let radial =
        (2.0 * lambda + 1.0) * r.powf(lambda - 1.0) * eta_prime(r) + r.powf(lambda) * eta_second(r);
    angular * radial - pi * pi * exact_state(omega, x)
}

/// The reference case: exact solution plus the data of the modified state
/// equation, wired per the construction above.
pub struct ManufacturedCase {
    pub omega: AngleCase,
    pub lambda: f64,
    /// Optimal state u.
    pub state: ScalarField,
    /// Optimal adjoint state z (pointwise equal to the state).
    pub adjoint: ScalarField,
    /// Optimal control q = -z on the boundary.
    pub q_bar: ScalarField,
    /// Volume data f = -Lap(u) + u.
    pub f: ScalarField,
    /// Fixed boundary data g = -q.
    pub g: ScalarField,
    /// Desired state u_d = u + Lap(z) - z; with u = z this is Lap(z).
    pub u_d: ScalarField,
}

/// Deviations observed by the self-check oracles (all should be tiny).
#[derive(Debug, Clone, Default)]
pub struct SelfCheckReport {
    /// Max |closed-form - central difference| for eta' and eta''.
    pub eta_fd_error: f64,
    /// Max mixed abs/rel deviation of the closed-form Laplacian from the
    /// 7-point finite-difference stencil at interior points.
    pub laplacian_fd_error: f64,
    /// Max |dz/dn| over random points on all six facets.
    pub normal_derivative: f64,
    /// Max |u - z| over random points (exact by construction).
    pub state_adjoint_gap: f64,
    /// Max |f| and |u_d| seen near the singular edge.
    pub data_bound: f64,
}

const ETA_FD_TOL: f64 = 1e-8;
const LAPLACIAN_FD_TOL: f64 = 1e-5;
const NORMAL_DERIVATIVE_TOL: f64 = 1e-6;
const DATA_BOUND: f64 = 100.0;

/// Runs the finite-difference oracles for one angle case and returns the
/// observed deviations, or an error describing the first violation.
pub fn self_check(omega: AngleCase) -> Result<SelfCheckReport> {
    let mut report = SelfCheckReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ omega.lambda().to_bits());

    // Closed-form eta derivatives against central differences.
    let h = 1e-6;
    for _ in 0..200 {
        let r: f64 = rng.random_range(h..1.0 - h);
        let fd1 = (eta(r + h) - eta(r - h)) / (2.0 * h);
        let e1 = (fd1 - eta_prime(r)).abs();
        let fd2 = (eta_prime(r + h) - eta_prime(r - h)) / (2.0 * h);
        let e2 = (fd2 - eta_second(r)).abs();
        report.eta_fd_error = report.eta_fd_error.max(e1).max(e2);
    }
    if report.eta_fd_error > ETA_FD_TOL {
        return Err(Error::Oracle(format!(
            "eta derivatives deviate from finite differences by {:.3e}",
            report.eta_fd_error
        )));
    }

    // Closed-form Laplacian against the 7-point stencil. Points keep a
    // margin from the boundary (the stencil must stay inside) and from
    // the edge r = 0, where the fourth derivatives driving the stencil's
    // truncation error grow like r^(lambda-4).
    let h_fd = 1e-4;
    let margin = 2.5 * h_fd;
    let mut checked = 0;
    while checked < 100 {
        let x = sample_interior(&mut rng, omega, margin);
        let r = x[0].hypot(x[1]);
        if r < 0.1 {
            continue;
        }
        checked += 1;
        let mut fd = -6.0 * exact_state(omega, x);
        for d in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h_fd;
            xm[d] -= h_fd;
            fd += exact_state(omega, xp) + exact_state(omega, xm);
        }
        fd /= h_fd * h_fd;
        let closed = exact_laplacian(omega, x);
        let dev = (closed - fd).abs() / (1.0 + closed.abs());
        report.laplacian_fd_error = report.laplacian_fd_error.max(dev);
    }
    if report.laplacian_fd_error > LAPLACIAN_FD_TOL {
        return Err(Error::Oracle(format!(
            "Laplacian deviates from the 7-point stencil by {:.3e}",
            report.laplacian_fd_error
        )));
    }

    // dz/dn = 0 on each facet, by central differences along the normal
    // (the closed form extends smoothly past every facet).
    let hn = 1e-6;
    for facet in crate::mesh::Facet::ALL {
        let normal = facet.outward_normal(omega);
        for _ in 0..20 {
            let x = sample_facet(&mut rng, omega, facet);
            let mut xp = x;
            let mut xm = x;
            for d in 0..3 {
                xp[d] += hn * normal[d];
                xm[d] -= hn * normal[d];
            }
            let dn = (exact_state(omega, xp) - exact_state(omega, xm)) / (2.0 * hn);
            report.normal_derivative = report.normal_derivative.max(dn.abs());
        }
    }
    if report.normal_derivative > NORMAL_DERIVATIVE_TOL {
        return Err(Error::Oracle(format!(
            "normal derivative {:.3e} on the boundary",
            report.normal_derivative
        )));
    }

    // u = z pointwise, and f, u_d stay bounded near the edge r = 0.
    let case = case_unchecked(omega);
    for _ in 0..1000 {
        let x = sample_interior(&mut rng, omega, 0.0);
        let gap = ((case.state)(x) - (case.adjoint)(x)).abs();
        report.state_adjoint_gap = report.state_adjoint_gap.max(gap);
    }
    for _ in 0..200 {
        let r: f64 = rng.random_range(1e-8..1e-2);
        let phi: f64 = rng.random_range(0.0..omega.omega());
        let x = [r * phi.cos(), r * phi.sin(), rng.random_range(0.0..1.0)];
        let f_val = (case.f)(x).abs();
        let ud_val = (case.u_d)(x).abs();
        report.data_bound = report.data_bound.max(f_val).max(ud_val);
    }
    if report.data_bound > DATA_BOUND {
        return Err(Error::Oracle(format!(
            "data unbounded near the edge: |f|,|u_d| up to {:.3e}",
            report.data_bound
        )));
    }

    Ok(report)
}

/// Uniform sample of the prism interior with the given margin to every
/// facet plane.
fn sample_interior(rng: &mut ChaCha8Rng, omega: AngleCase, margin: f64) -> [f64; 3] {
    let c = omega.cot();
    let w = omega.omega();
    let (sin_w, cos_w) = (w.sin(), w.cos());
    let x_low = if c < 0.0 { c } else { 0.0 };
    loop {
        let x = rng.random_range(x_low..1.0);
        let y = rng.random_range(0.0..1.0);
        let z = rng.random_range(0.0..1.0);
        let inside = y >= margin
            && 1.0 - x >= margin
            && 1.0 - y >= margin
            && sin_w * x - cos_w * y >= margin
            && z >= margin
            && 1.0 - z >= margin;
        if inside {
            return [x, y, z];
        }
    }
}

/// Random point strictly inside a facet.
fn sample_facet(rng: &mut ChaCha8Rng, omega: AngleCase, facet: crate::mesh::Facet) -> [f64; 3] {
    use crate::mesh::Facet;
    let c = omega.cot();
    let m = 1e-3;
    match facet {
        Facet::Y0 => [
            rng.random_range(m..1.0 - m),
            0.0,
            rng.random_range(m..1.0 - m),
        ],
        Facet::X1 => [
            1.0,
            rng.random_range(m..1.0 - m),
            rng.random_range(m..1.0 - m),
        ],
        Facet::Y1 => [
            rng.random_range(c + m..1.0 - m),
            1.0,
            rng.random_range(m..1.0 - m),
        ],
        Facet::Omega => {
            let t: f64 = rng.random_range(m..1.0 - m);
            [t * c, t, rng.random_range(m..1.0 - m)]
        }
        Facet::Z0 | Facet::Z1 => {
            let xy = sample_interior(rng, omega, 1e-3);
            let z = if facet == Facet::Z0 { 0.0 } else { 1.0 };
            [xy[0], xy[1], z]
        }
    }
}

/// Builds the reference case for an angle, running the self-check oracles
/// first; construction aborts if any oracle fails.
pub fn build_case(omega: AngleCase) -> Result<ManufacturedCase> {
    self_check(omega)?;
    Ok(case_unchecked(omega))
}

/// Wires the case without re-running the oracles (for callers that have
/// already checked this angle).
pub fn case_unchecked(omega: AngleCase) -> ManufacturedCase {
    ManufacturedCase {
        omega,
        lambda: omega.lambda(),
        state: Box::new(move |x| exact_state(omega, x)),
        adjoint: Box::new(move |x| exact_state(omega, x)),
        q_bar: Box::new(move |x| -exact_state(omega, x)),
        f: Box::new(move |x| -exact_laplacian(omega, x) + exact_state(omega, x)),
        g: Box::new(move |x| exact_state(omega, x)),
        u_d: Box::new(move |x| exact_laplacian(omega, x)),
    }
}
