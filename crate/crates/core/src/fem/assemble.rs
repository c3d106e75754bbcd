//! P1 assembly: stiffness, mass, volume and boundary load vectors.

use crate::error::{Error, Result};
use crate::mesh::{signed_volume, Mesh};

use super::quadrature::{TetQuadrature, TriQuadrature, TET_REF_MEASURE, TRI_REF_MEASURE};
use super::sparse::SparseMatrix;

/// A P1 finite-element function: one coefficient per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    pub coefficients: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: &Mesh, coefficients: Vec<f64>) -> FeFunction {
        assert_eq!(coefficients.len(), mesh.n_vertices());
        FeFunction { coefficients }
    }

    pub fn zeros(mesh: &Mesh) -> FeFunction {
        FeFunction {
            coefficients: vec![0.0; mesh.n_vertices()],
        }
    }

    pub fn constant(mesh: &Mesh, value: f64) -> FeFunction {
        FeFunction {
            coefficients: vec![value; mesh.n_vertices()],
        }
    }
}

/// Nodal (Lagrange) interpolation of a scalar field.
pub fn nodal_interpolate<F>(mesh: &Mesh, exact: &F) -> FeFunction
where
    F: Fn([f64; 3]) -> f64 + ?Sized,
{
    FeFunction {
        coefficients: mesh.vertices.iter().map(|&v| exact(v)).collect(),
    }
}

/// Constant barycentric gradients of the four P1 basis functions on a tet
/// and its volume.
pub(crate) fn p1_gradients(coords: &[[f64; 3]; 4]) -> Result<([[f64; 3]; 4], f64)> {
    let volume = signed_volume(coords);
    if volume <= 0.0 {
        return Err(Error::Assembly(format!(
            "degenerate or inverted tet (volume {volume})"
        )));
    }
    // Rows of the inverse of D = [x1-x0, x2-x0, x3-x0] are the gradients
    // of the barycentric coordinates 1..3.
    let d = [
        [
            coords[1][0] - coords[0][0],
            coords[2][0] - coords[0][0],
            coords[3][0] - coords[0][0],
        ],
        [
            coords[1][1] - coords[0][1],
            coords[2][1] - coords[0][1],
            coords[3][1] - coords[0][1],
        ],
        [
            coords[1][2] - coords[0][2],
            coords[2][2] - coords[0][2],
            coords[3][2] - coords[0][2],
        ],
    ];
    let det = 6.0 * volume;
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| d[r0][c0] * d[r1][c1] - d[r0][c1] * d[r1][c0];
    // inv(D) = adj(D)^T / det; gradient k is row k-1 of inv(D).
    let mut grads = [[0.0; 3]; 4];
    grads[1] = [
        cof(1, 2, 1, 2) / det,
        -cof(0, 2, 1, 2) / det,
        cof(0, 1, 1, 2) / det,
    ];
    grads[2] = [
        -cof(1, 2, 0, 2) / det,
        cof(0, 2, 0, 2) / det,
        -cof(0, 1, 0, 2) / det,
    ];
    grads[3] = [
        cof(1, 2, 0, 1) / det,
        -cof(0, 2, 0, 1) / det,
        cof(0, 1, 0, 1) / det,
    ];
    for k in 0..3 {
        grads[0][k] = -grads[1][k] - grads[2][k] - grads[3][k];
    }
    Ok((grads, volume))
}

/// Assembles the P1 mass matrix M with (M)_ij = (phi_j, phi_i).
pub fn assemble_mass(mesh: &Mesh) -> Result<SparseMatrix> {
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(mesh.n_tets() * 16);
    for t in 0..mesh.n_tets() {
        let coords = mesh.tet_coords(t);
        let volume = signed_volume(&coords);
        if volume <= 0.0 {
            return Err(Error::Assembly(format!("degenerate tet {t}")));
        }
        let tet = mesh.tets[t];
        for i in 0..4 {
            for j in 0..4 {
                let m = if i == j { volume / 10.0 } else { volume / 20.0 };
                triplets.push((tet[i], tet[j], m));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, triplets))
}

/// Assembles the P1 stiffness matrix K with (K)_ij = (grad phi_j, grad phi_i).
pub fn assemble_stiffness(mesh: &Mesh) -> Result<SparseMatrix> {
    let n = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(mesh.n_tets() * 16);
    for t in 0..mesh.n_tets() {
        let (grads, volume) = p1_gradients(&mesh.tet_coords(t))?;
        let tet = mesh.tets[t];
        for i in 0..4 {
            for j in 0..4 {
                let k = volume
                    * (grads[i][0] * grads[j][0]
                        + grads[i][1] * grads[j][1]
                        + grads[i][2] * grads[j][2]);
                triplets.push((tet[i], tet[j], k));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, triplets))
}

/// Assembles the system matrix A = K + M of the bilinear form
/// (grad u, grad v) + (u, v). Symmetric positive definite.
pub fn assemble_system(mesh: &Mesh) -> Result<SparseMatrix> {
    assemble_stiffness(mesh)?.add(&assemble_mass(mesh)?)
}

/// Volume load vector with entries (f, phi_i), by tet quadrature of the
/// given polynomial exactness degree.
pub fn assemble_volume_load<F>(mesh: &Mesh, f: &F, degree: usize) -> Result<Vec<f64>>
where
    F: Fn([f64; 3]) -> f64 + ?Sized,
{
    let rule = TetQuadrature::with_degree(degree)?;
    let mut load = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_tets() {
        let coords = mesh.tet_coords(t);
        let volume = signed_volume(&coords);
        if volume <= 0.0 {
            return Err(Error::Assembly(format!("degenerate tet {t}")));
        }
        let scale = volume / TET_REF_MEASURE;
        let tet = mesh.tets[t];
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let mut x = [0.0; 3];
            for k in 0..4 {
                for d in 0..3 {
                    x[d] += bary[k] * coords[k][d];
                }
            }
            let fw = f(x) * w * scale;
            for k in 0..4 {
                load[tet[k]] += fw * bary[k];
            }
        }
    }
    Ok(load)
}

/// Boundary load vector with entries (g, phi_i)_{dOmega}, by triangle
/// quadrature on the boundary faces. Interior-vertex entries are zero.
pub fn assemble_boundary_load<G>(mesh: &Mesh, g: &G, degree: usize) -> Result<Vec<f64>>
where
    G: Fn([f64; 3]) -> f64 + ?Sized,
{
    let rule = TriQuadrature::with_degree(degree)?;
    let mut load = vec![0.0; mesh.n_vertices()];
    for face in &mesh.boundary_faces {
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
            let gw = g(x) * w * scale;
            for k in 0..3 {
                load[face.vertices[k]] += gw * bary[k];
            }
        }
    }
    Ok(load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, AngleCase};

    #[test]
    fn reference_tet_mass_row_sums() {
        // Single reference tet: hat-function integrals are |T|/4 = 1/24.
        let coords = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let volume = signed_volume(&coords);
        assert!((volume - 1.0 / 6.0).abs() < 1e-15);
        for i in 0..4 {
            let mut row_sum = 0.0;
            for j in 0..4 {
                row_sum += if i == j { volume / 10.0 } else { volume / 20.0 };
            }
            assert!((row_sum - 1.0 / 24.0).abs() < 1e-15);
        }
        // Cross-check against degree-2 quadrature of the hat functions.
        let rule = TetQuadrature::with_degree(2).unwrap();
        for i in 0..4 {
            let q: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, &w)| w * p[i])
                .sum();
            assert!((q * volume / TET_REF_MEASURE - 1.0 / 24.0).abs() < 1e-15);
        }
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = generate_mesh(AngleCase::ThreePiOver4, 1).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        let y = k.apply_vec(&ones);
        let max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-13, "K*1 = {max}");
    }

    #[test]
    fn mass_total_is_volume() {
        for omega in AngleCase::ALL {
            let mesh = generate_mesh(omega, 1).unwrap();
            let m = assemble_mass(&mesh).unwrap();
            let ones = vec![1.0; mesh.n_vertices()];
            let total: f64 = m.apply_vec(&ones).iter().sum();
            let exact = omega.cross_section_area();
            assert!((total - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn system_is_symmetric_and_positive() {
        let mesh = generate_mesh(AngleCase::TwoPiOver3, 1).unwrap();
        let a = assemble_system(&mesh).unwrap();
        assert!(a.asymmetry() < 1e-13);
        // Positive definiteness spot check with deterministic vectors.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = mesh.n_vertices();
        for _ in 0..10 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ax = a.apply_vec(&x);
            let quad: f64 = x.iter().zip(&ax).map(|(u, v)| u * v).sum();
            assert!(quad > 0.0);
        }
    }

    #[test]
    fn volume_load_partition_of_unity() {
        let mesh = generate_mesh(AngleCase::ThreePiOver4, 1).unwrap();
        let load = assemble_volume_load(&mesh, &|_| 1.0, 2).unwrap();
        let total: f64 = load.iter().sum();
        assert!((total - mesh.omega.cross_section_area()).abs() < 1e-13);
        let zero = assemble_volume_load(&mesh, &|_| 0.0, 2).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn volume_load_linear_moment() {
        // f = x1 on the unit cube: entries sum to int x1 = 1/2.
        let mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        let load = assemble_volume_load(&mesh, &|x| x[0], 2).unwrap();
        let total: f64 = load.iter().sum();
        assert!((total - 0.5).abs() < 1e-13);
    }

    #[test]
    fn boundary_load_partition_of_unity() {
        for omega in AngleCase::ALL {
            let mesh = generate_mesh(omega, 1).unwrap();
            let load = assemble_boundary_load(&mesh, &|_| 1.0, 2).unwrap();
            let total: f64 = load.iter().sum();
            assert!((total - omega.boundary_area()).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_load_is_patch_area_over_three() {
        // For g = 1 the hat integral over the flat incident patch is
        // patch area / 3; interior vertices get zero.
        let mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        let load = assemble_boundary_load(&mesh, &|_| 1.0, 3).unwrap();
        let mut patch = vec![0.0; mesh.n_vertices()];
        for face in &mesh.boundary_faces {
            for &v in &face.vertices {
                patch[v] += face.area / 3.0;
            }
        }
        for v in 0..mesh.n_vertices() {
            assert!((load[v] - patch[v]).abs() < 1e-14, "vertex {v}");
        }
    }

    #[test]
    fn nodal_interpolation_reproduces_affine() {
        let mesh = generate_mesh(AngleCase::TwoPiOver3, 1).unwrap();
        let affine = |x: [f64; 3]| 0.5 - 2.0 * x[0] + 3.0 * x[1] + 0.25 * x[2];
        let u = nodal_interpolate(&mesh, &affine);
        // Exact at quadrature points of every tet.
        let rule = TetQuadrature::with_degree(2).unwrap();
        for t in 0..mesh.n_tets() {
            let coords = mesh.tet_coords(t);
            let tet = mesh.tets[t];
            for bary in &rule.points {
                let mut x = [0.0; 3];
                let mut val = 0.0;
                for k in 0..4 {
                    for d in 0..3 {
                        x[d] += bary[k] * coords[k][d];
                    }
                    val += bary[k] * u.coefficients[tet[k]];
                }
                assert!((val - affine(x)).abs() < 1e-13);
            }
        }
        let zero = nodal_interpolate(&mesh, &|_| 0.0);
        assert!(zero.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn degenerate_tet_is_assembly_error() {
        let mut mesh = generate_mesh(AngleCase::PiOver2, 0).unwrap();
        let t0 = mesh.tets[0];
        mesh.tets[0] = [t0[0], t0[0], t0[1], t0[2]];
        assert!(matches!(
            assemble_stiffness(&mesh),
            Err(crate::error::Error::Assembly(_))
        ));
        assert!(matches!(
            assemble_mass(&mesh),
            Err(crate::error::Error::Assembly(_))
        ));
    }
}
