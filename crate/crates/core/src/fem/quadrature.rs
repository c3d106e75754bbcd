//! Quadrature rules on reference simplices.
//!
//! Degrees 1 and 2 use the classical compact symmetric rules; higher
//! degrees use conical-product Gauss-Legendre rules (the collapsed-cube
//! construction), which have strictly interior points and positive
//! weights at every degree. Interior points matter here because the
//! integrands carry an `r^(lambda-1)` edge singularity that must never be
//! evaluated at `r = 0`.

use crate::error::{Error, Result};

/// Highest supported polynomial exactness degree.
pub const MAX_DEGREE: usize = 12;

/// Quadrature rule on the reference tetrahedron
/// `{x,y,z >= 0, x+y+z <= 1}` (measure 1/6). Points are barycentric.
#[derive(Debug, Clone)]
pub struct TetQuadrature {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Quadrature rule on the reference triangle (measure 1/2), barycentric.
#[derive(Debug, Clone)]
pub struct TriQuadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Reference tetrahedron measure.
pub const TET_REF_MEASURE: f64 = 1.0 / 6.0;
/// Reference triangle measure.
pub const TRI_REF_MEASURE: f64 = 0.5;

impl TetQuadrature {
    pub fn with_degree(degree: usize) -> Result<TetQuadrature> {
        check_degree(degree)?;
        match degree {
            1 => Ok(TetQuadrature {
                points: vec![[0.25; 4]],
                weights: vec![TET_REF_MEASURE],
                degree,
            }),
            2 => {
                // Symmetric 4-point rule: b = (5 - sqrt(5))/20.
                let b = (5.0 - 5.0_f64.sqrt()) / 20.0;
                let a = 1.0 - 3.0 * b;
                let mut points = Vec::with_capacity(4);
                for k in 0..4 {
                    let mut p = [b; 4];
                    p[k] = a;
                    points.push(p);
                }
                Ok(TetQuadrature {
                    points,
                    weights: vec![TET_REF_MEASURE / 4.0; 4],
                    degree,
                })
            }
            d => Ok(collapsed_tet(d)),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl TriQuadrature {
    pub fn with_degree(degree: usize) -> Result<TriQuadrature> {
        check_degree(degree)?;
        match degree {
            1 => Ok(TriQuadrature {
                points: vec![[1.0 / 3.0; 3]],
                weights: vec![TRI_REF_MEASURE],
                degree,
            }),
            2 => {
                // Interior 3-point rule (2/3, 1/6, 1/6).
                let mut points = Vec::with_capacity(3);
                for k in 0..3 {
                    let mut p = [1.0 / 6.0; 3];
                    p[k] = 2.0 / 3.0;
                    points.push(p);
                }
                Ok(TriQuadrature {
                    points,
                    weights: vec![TRI_REF_MEASURE / 3.0; 3],
                    degree,
                })
            }
            d => Ok(collapsed_tri(d)),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::Config(format!(
            "quadrature degree {degree} out of range 1..={MAX_DEGREE}"
        )));
    }
    Ok(())
}

/// Gauss-Legendre nodes/weights on [0,1], exact for degree 2m-1.
/// Nodes are found by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Chebyshev-like initial guess on [-1,1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1,1] -> [0,1]; reverse so nodes come out ascending.
        nodes[m - 1 - i] = 0.5 * (x + 1.0);
        weights[m - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Legendre polynomial P_m and derivative at x via the three-term
/// recurrence.
fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Smallest m with Gauss exactness 2m-1 >= d.
fn gauss_points_for(d: usize) -> usize {
    d / 2 + 1
}

/// Conical-product rule on the triangle: map (u,v) in [0,1]^2 to
/// barycentric (1-u, u(1-v), uv) with Jacobian u.
fn collapsed_tri(degree: usize) -> TriQuadrature {
    let (un, uw) = gauss_legendre_unit(gauss_points_for(degree + 1));
    let (vn, vw) = gauss_legendre_unit(gauss_points_for(degree));
    let mut points = Vec::with_capacity(un.len() * vn.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (&u, &wu) in un.iter().zip(&uw) {
        for (&v, &wv) in vn.iter().zip(&vw) {
            let l1 = u * (1.0 - v);
            let l2 = u * v;
            points.push([1.0 - u, l1, l2]);
            weights.push(wu * wv * u);
        }
    }
    TriQuadrature {
        points,
        weights,
        degree,
    }
}

/// Conical-product rule on the tetrahedron: map (u,v,w) in [0,1]^3 to
/// barycentric (1-l1-l2-l3, u, v(1-u), w(1-u)(1-v)) with Jacobian
/// (1-u)^2 (1-v).
fn collapsed_tet(degree: usize) -> TetQuadrature {
    let (un, uw) = gauss_legendre_unit(gauss_points_for(degree + 2));
    let (vn, vw) = gauss_legendre_unit(gauss_points_for(degree + 1));
    let (wn, ww) = gauss_legendre_unit(gauss_points_for(degree));
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (&u, &wu) in un.iter().zip(&uw) {
        for (&v, &wv) in vn.iter().zip(&vw) {
            for (&w, &wwt) in wn.iter().zip(&ww) {
                let l1 = u;
                let l2 = v * (1.0 - u);
                let l3 = w * (1.0 - u) * (1.0 - v);
                points.push([1.0 - l1 - l2 - l3, l1, l2, l3]);
                weights.push(wu * wv * wwt * (1.0 - u) * (1.0 - u) * (1.0 - v));
            }
        }
    }
    TetQuadrature {
        points,
        weights,
        degree,
    }
}
