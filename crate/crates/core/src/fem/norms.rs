//! L2 error evaluation in the volume and on the boundary.

use crate::error::Result;
use crate::mesh::Mesh;

use super::assemble::FeFunction;
use super::quadrature::{TetQuadrature, TriQuadrature, TET_REF_MEASURE, TRI_REF_MEASURE};

/// ||exact - u_h||_{L2(Omega)} by tet quadrature of the given degree.
pub fn l2_error_volume<F>(mesh: &Mesh, u_h: &FeFunction, exact: &F, degree: usize) -> Result<f64>
where
    F: Fn([f64; 3]) -> f64 + ?Sized,
{
    let rule = TetQuadrature::with_degree(degree)?;
    let mut total = 0.0;
    for t in 0..mesh.n_tets() {
        let coords = mesh.tet_coords(t);
        let tet = mesh.tets[t];
        let scale = mesh.tet_volume(t) / TET_REF_MEASURE;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let mut x = [0.0; 3];
            let mut uh = 0.0;
            for k in 0..4 {
                for d in 0..3 {
                    x[d] += bary[k] * coords[k][d];
                }
                uh += bary[k] * u_h.coefficients[tet[k]];
            }
            let diff = exact(x) - uh;
            total += w * scale * diff * diff;
        }
    }
    Ok(total.sqrt())
}

/// ||exact - v||_{L2(dOmega)} where `v` is any function evaluable per
/// boundary face at barycentric coordinates.
pub fn l2_error_boundary_with<V, F>(mesh: &Mesh, value: V, exact: &F, degree: usize) -> Result<f64>
where
    V: Fn(usize, [f64; 3], [f64; 3]) -> f64,
    F: Fn([f64; 3]) -> f64 + ?Sized,
{
    let rule = TriQuadrature::with_degree(degree)?;
    let mut total = 0.0;
    for (fi, face) in mesh.boundary_faces.iter().enumerate() {
        let coords = [
            mesh.vertices[face.vertices[0]],
            mesh.vertices[face.vertices[1]],
            mesh.vertices[face.vertices[2]],
        ];
        let scale = face.area / TRI_REF_MEASURE;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let mut x = [0.0; 3];
            for k in 0..3 {
                for d in 0..3 {
                    x[d] += bary[k] * coords[k][d];
                }
            }
            let diff = exact(x) - value(fi, *bary, x);
            total += w * scale * diff * diff;
        }
    }
    Ok(total.sqrt())
}

/// ||exact - tr u_h||_{L2(dOmega)} for the boundary trace of a P1 volume
/// function.
pub fn l2_error_boundary_fe<F>(
    mesh: &Mesh,
    u_h: &FeFunction,
    exact: &F,
    degree: usize,
) -> Result<f64>
where
    F: Fn([f64; 3]) -> f64 + ?Sized,
{
    l2_error_boundary_with(
        mesh,
        |fi, bary, _| {
            let vs = mesh.boundary_faces[fi].vertices;
            bary[0] * u_h.coefficients[vs[0]]
                + bary[1] * u_h.coefficients[vs[1]]
                + bary[2] * u_h.coefficients[vs[2]]
        },
        exact,
        degree,
    )
}

/// ||g||_{L2(dOmega)} of a scalar field by boundary quadrature.
pub fn l2_norm_boundary<F>(mesh: &Mesh, g: &F, degree: usize) -> Result<f64>
where
    F: Fn([f64; 3]) -> f64 + ?Sized,
{
    l2_error_boundary_with(mesh, |_, _, _| 0.0, g, degree)
}
