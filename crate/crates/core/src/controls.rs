//! Discrete control spaces on the boundary.
//!
//! Two discretizations of the boundary control: piecewise constants on
//! boundary faces, and traces of the volume P1 space (one degree of
//! freedom per boundary vertex; no separate surface mesh is built, so the
//! coupling to the volume space is a sub-block of the surface mass
//! matrix).

use crate::error::Result;
use crate::fem::norms::l2_error_boundary_with;
use crate::fem::quadrature::TRI_REF_MEASURE;
use crate::fem::solve::solve_spd;
use crate::fem::sparse::SparseMatrix;
use crate::fem::TriQuadrature;
use crate::mesh::Mesh;

/// Inner CG tolerance for Gram solves (projection).
const GRAM_SOLVE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlSpaceKind {
    /// Piecewise constant on boundary faces.
    PwConstant,
    /// Piecewise linear, globally continuous: traces of the P1 space.
    PwLinear,
}

impl ControlSpaceKind {
    pub const ALL: [ControlSpaceKind; 2] =
        [ControlSpaceKind::PwConstant, ControlSpaceKind::PwLinear];

    pub fn label(self) -> &'static str {
        match self {
            ControlSpaceKind::PwConstant => "pw-constant",
            ControlSpaceKind::PwLinear => "pw-linear",
        }
    }

    pub fn from_label(s: &str) -> Result<ControlSpaceKind> {
        match s {
            "pw-constant" => Ok(ControlSpaceKind::PwConstant),
            "pw-linear" => Ok(ControlSpaceKind::PwLinear),
            other => Err(crate::error::Error::Config(format!(
                "unsupported control space '{other}' (expected pw-constant or pw-linear)"
            ))),
        }
    }
}

/// A discrete control space bound to a mesh.
///
/// Degrees of freedom are boundary faces (in `mesh.boundary_faces` order)
/// for `PwConstant` and boundary vertices (ascending global index) for
/// `PwLinear`.
#[derive(Debug, Clone)]
pub struct ControlSpace {
    pub kind: ControlSpaceKind,
    pub dof_count: usize,
    /// PwLinear: dof index -> global vertex index.
    pub dof_to_vertex: Vec<usize>,
    /// PwLinear: global vertex index -> dof index.
    pub vertex_to_dof: Vec<Option<usize>>,
}

/// Coefficient vector over a control space.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFunction {
    pub coefficients: Vec<f64>,
}

impl ControlFunction {
    pub fn new(space: &ControlSpace, coefficients: Vec<f64>) -> ControlFunction {
        assert_eq!(coefficients.len(), space.dof_count);
        ControlFunction { coefficients }
    }

    pub fn zeros(space: &ControlSpace) -> ControlFunction {
        ControlFunction {
            coefficients: vec![0.0; space.dof_count],
        }
    }

    pub fn constant(space: &ControlSpace, value: f64) -> ControlFunction {
        ControlFunction {
            coefficients: vec![value; space.dof_count],
        }
    }

    /// Value of the control at barycentric coordinates of a boundary face.
    pub fn eval_on_face(
        &self,
        space: &ControlSpace,
        mesh: &Mesh,
        face_index: usize,
        bary: [f64; 3],
    ) -> f64 {
        match space.kind {
            ControlSpaceKind::PwConstant => self.coefficients[face_index],
            ControlSpaceKind::PwLinear => {
                let vs = mesh.boundary_faces[face_index].vertices;
                (0..3)
                    .map(|k| {
                        bary[k]
                            * self.coefficients[space.vertex_to_dof[vs[k]]
                                .expect("boundary face vertex without control dof")]
                    })
                    .sum()
            }
        }
    }
}

/// Enumerates the control degrees of freedom on the mesh boundary.
pub fn build_space(mesh: &Mesh, kind: ControlSpaceKind) -> ControlSpace {
    match kind {
        ControlSpaceKind::PwConstant => ControlSpace {
            kind,
            dof_count: mesh.boundary_faces.len(),
            dof_to_vertex: Vec::new(),
            vertex_to_dof: Vec::new(),
        },
        ControlSpaceKind::PwLinear => {
            let dof_to_vertex = mesh.boundary_vertices();
            let mut vertex_to_dof = vec![None; mesh.n_vertices()];
            for (dof, &v) in dof_to_vertex.iter().enumerate() {
                vertex_to_dof[v] = Some(dof);
            }
            ControlSpace {
                kind,
                dof_count: dof_to_vertex.len(),
                dof_to_vertex,
                vertex_to_dof,
            }
        }
    }
}

/// Local P1 surface mass block for a face of the given area:
/// area/12 * (1 + delta_ij).
pub(crate) fn surface_mass_block(area: f64) -> [[f64; 3]; 3] {
    let off = area / 12.0;
    let diag = area / 6.0;
    [[diag, off, off], [off, diag, off], [off, off, diag]]
}

/// Gram matrix M_Q of the control space: (M_Q)_ij = (psi_j, psi_i)_{dOmega}.
/// Diagonal with face areas for piecewise constants, the P1 surface mass
/// matrix for traces.
pub fn gram(mesh: &Mesh, space: &ControlSpace) -> SparseMatrix {
    match space.kind {
        ControlSpaceKind::PwConstant => {
            let areas: Vec<f64> = mesh.boundary_faces.iter().map(|f| f.area).collect();
            SparseMatrix::diagonal(&areas)
        }
        ControlSpaceKind::PwLinear => {
            let mut triplets = Vec::with_capacity(mesh.boundary_faces.len() * 9);
            for face in &mesh.boundary_faces {
                let block = surface_mass_block(face.area);
                for i in 0..3 {
                    for j in 0..3 {
                        let di = space.vertex_to_dof[face.vertices[i]].unwrap();
                        let dj = space.vertex_to_dof[face.vertices[j]].unwrap();
                        triplets.push((di, dj, block[i][j]));
                    }
                }
            }
            SparseMatrix::from_triplets(space.dof_count, space.dof_count, triplets)
        }
    }
}

/// Coupling matrix N with N_ij = (psi_j, phi_i)_{dOmega}, mapping control
/// coefficients to a volume load vector. Rows of interior vertices are
/// zero (absent).
pub fn coupling(mesh: &Mesh, space: &ControlSpace) -> SparseMatrix {
    let n_rows = mesh.n_vertices();
    match space.kind {
        ControlSpaceKind::PwConstant => {
            let mut triplets = Vec::with_capacity(mesh.boundary_faces.len() * 3);
            for (fi, face) in mesh.boundary_faces.iter().enumerate() {
                for &v in &face.vertices {
                    triplets.push((v, fi, face.area / 3.0));
                }
            }
            SparseMatrix::from_triplets(n_rows, space.dof_count, triplets)
        }
        ControlSpaceKind::PwLinear => {
            let mut triplets = Vec::with_capacity(mesh.boundary_faces.len() * 9);
            for face in &mesh.boundary_faces {
                let block = surface_mass_block(face.area);
                for i in 0..3 {
                    for j in 0..3 {
                        let dj = space.vertex_to_dof[face.vertices[j]].unwrap();
                        triplets.push((face.vertices[i], dj, block[i][j]));
                    }
                }
            }
            SparseMatrix::from_triplets(n_rows, space.dof_count, triplets)
        }
    }
}

/// L2(dOmega)-orthogonal projection of a scalar field onto the control
/// space: solves M_Q c = r with r_j = (g, psi_j)_{dOmega} assembled with
/// the given quadrature degree.
pub fn project_boundary<G>(
    mesh: &Mesh,
    space: &ControlSpace,
    g: &G,
    degree: usize,
) -> Result<ControlFunction>
where
    G: Fn([f64; 3]) -> f64 + ?Sized,
{
    let rhs = boundary_moments(mesh, space, g, degree)?;
    let m_q = gram(mesh, space);
    let sol = solve_spd(&m_q, &rhs, GRAM_SOLVE_TOL)?;
    Ok(ControlFunction {
        coefficients: sol.x,
    })
}

/// Moment vector r_j = (g, psi_j)_{dOmega} of the control basis.
pub fn boundary_moments<G>(
    mesh: &Mesh,
    space: &ControlSpace,
    g: &G,
    degree: usize,
) -> Result<Vec<f64>>
where
    G: Fn([f64; 3]) -> f64 + ?Sized,
{
    let rule = TriQuadrature::with_degree(degree)?;
    let mut rhs = vec![0.0; space.dof_count];
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
            let gw = g(x) * w * scale;
            match space.kind {
                ControlSpaceKind::PwConstant => rhs[fi] += gw,
                ControlSpaceKind::PwLinear => {
                    for k in 0..3 {
                        rhs[space.vertex_to_dof[face.vertices[k]].unwrap()] += gw * bary[k];
                    }
                }
            }
        }
    }
    Ok(rhs)
}

/// ||exact - q_h||_{L2(dOmega)} for a control function.
pub fn l2_error_boundary_control<F>(
    mesh: &Mesh,
    space: &ControlSpace,
    q: &ControlFunction,
    exact: &F,
    degree: usize,
) -> Result<f64>
where
    F: Fn([f64; 3]) -> f64 + ?Sized,
{
    l2_error_boundary_with(
        mesh,
        |fi, bary, _| q.eval_on_face(space, mesh, fi, bary),
        exact,
        degree,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_boundary_load;
    use crate::mesh::{generate_mesh, AngleCase};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_level1_dof_counts() {
        let mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        let q0 = build_space(&mesh, ControlSpaceKind::PwConstant);
        assert_eq!(q0.dof_count, 48);
        let vh = build_space(&mesh, ControlSpaceKind::PwLinear);
        assert_eq!(vh.dof_count, 26);
    }

    #[test]
    fn level0_all_vertices_are_dofs() {
        for omega in AngleCase::ALL {
            let mesh = generate_mesh(omega, 0).unwrap();
            let vh = build_space(&mesh, ControlSpaceKind::PwLinear);
            assert_eq!(vh.dof_count, mesh.n_vertices());
        }
    }

    #[test]
    fn dof_maps_are_bijective() {
        let mesh = generate_mesh(AngleCase::ThreePiOver4, 1).unwrap();
        let vh = build_space(&mesh, ControlSpaceKind::PwLinear);
        let mut seen = vec![false; vh.dof_count];
        for v in 0..mesh.n_vertices() {
            if let Some(d) = vh.vertex_to_dof[v] {
                assert_eq!(vh.dof_to_vertex[d], v);
                assert!(!seen[d]);
                seen[d] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn gram_total_mass_is_boundary_area() {
        for omega in AngleCase::ALL {
            let mesh = generate_mesh(omega, 1).unwrap();
            for kind in ControlSpaceKind::ALL {
                let space = build_space(&mesh, kind);
                let m_q = gram(&mesh, &space);
                let ones = vec![1.0; space.dof_count];
                let total: f64 = m_q.apply_vec(&ones).iter().sum();
                assert!(
                    (total - omega.boundary_area()).abs() < 1e-12,
                    "{omega} {kind:?}"
                );
            }
        }
    }

    #[test]
    fn surface_mass_block_pattern() {
        let a = 0.37;
        let block = surface_mass_block(a);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 } else { 1.0 } * a / 12.0;
                assert!((block[i][j] - expected).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn coupling_consistent_with_boundary_load() {
        let mesh = generate_mesh(AngleCase::TwoPiOver3, 1).unwrap();
        let load = assemble_boundary_load(&mesh, &|_| 1.0, 2).unwrap();
        for kind in ControlSpaceKind::ALL {
            let space = build_space(&mesh, kind);
            let n = coupling(&mesh, &space);
            let ones = vec![1.0; space.dof_count];
            let nq = n.apply_vec(&ones);
            for (a, b) in nq.iter().zip(&load) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn coupling_interior_rows_zero() {
        let mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        let boundary: std::collections::HashSet<usize> =
            mesh.boundary_vertices().into_iter().collect();
        for kind in ControlSpaceKind::ALL {
            let space = build_space(&mesh, kind);
            let n = coupling(&mesh, &space);
            for v in 0..mesh.n_vertices() {
                if !boundary.contains(&v) {
                    assert_eq!(n.row(v).count(), 0, "interior vertex {v} has entries");
                }
            }
        }
    }

    #[test]
    fn coupling_total_is_control_integral() {
        // 1^T (N q) = int q ds, checked against a per-face quadrature
        // oracle for random coefficients.
        let mesh = generate_mesh(AngleCase::ThreePiOver4, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in ControlSpaceKind::ALL {
            let space = build_space(&mesh, kind);
            let n = coupling(&mesh, &space);
            let q = ControlFunction::new(
                &space,
                (0..space.dof_count)
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect(),
            );
            let total: f64 = n.apply_vec(&q.coefficients).iter().sum();
            // Oracle: integrate the control by face quadrature.
            let rule = TriQuadrature::with_degree(4).unwrap();
            let mut oracle = 0.0;
            for (fi, face) in mesh.boundary_faces.iter().enumerate() {
                let scale = face.area / TRI_REF_MEASURE;
                for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                    oracle += w * scale * q.eval_on_face(&space, &mesh, fi, *bary);
                }
            }
            assert!(
                (total - oracle).abs() < 1e-12,
                "{kind:?}: {total} vs {oracle}"
            );
        }
    }

    #[test]
    fn projection_of_space_member_is_identity() {
        let mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        // Affine fields restrict to members of the trace space.
        let affine = |x: [f64; 3]| 1.0 + x[0] - 2.0 * x[1] + 0.5 * x[2];
        let vh = build_space(&mesh, ControlSpaceKind::PwLinear);
        let proj = project_boundary(&mesh, &vh, &affine, 4).unwrap();
        for (d, &v) in vh.dof_to_vertex.iter().enumerate() {
            let x = mesh.vertices[v];
            assert!((proj.coefficients[d] - affine(x)).abs() < 1e-9);
        }
        // Constants live in both spaces.
        for kind in ControlSpaceKind::ALL {
            let space = build_space(&mesh, kind);
            let proj = project_boundary(&mesh, &space, &|_| 3.25, 4).unwrap();
            for &c in &proj.coefficients {
                assert!((c - 3.25).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pw_constant_projection_is_face_average() {
        let mesh = generate_mesh(AngleCase::TwoPiOver3, 1).unwrap();
        let g = |x: [f64; 3]| (x[0] + 0.3).powi(2) - x[1] * x[2];
        let q0 = build_space(&mesh, ControlSpaceKind::PwConstant);
        let proj = project_boundary(&mesh, &q0, &g, 4).unwrap();
        // Oracle: average by quadrature per face.
        let rule = TriQuadrature::with_degree(4).unwrap();
        for (fi, face) in mesh.boundary_faces.iter().enumerate() {
            let coords = [
                mesh.vertices[face.vertices[0]],
                mesh.vertices[face.vertices[1]],
                mesh.vertices[face.vertices[2]],
            ];
            let mut integral = 0.0;
            for (bary, &w) in rule.points.iter().zip(&rule.weights) {
                let mut x = [0.0; 3];
                for k in 0..3 {
                    for d in 0..3 {
                        x[d] += bary[k] * coords[k][d];
                    }
                }
                integral += w * (face.area / TRI_REF_MEASURE) * g(x);
            }
            assert!((proj.coefficients[fi] - integral / face.area).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_orthogonality() {
        // (g - pi_h g, q_h) = 0 for random q_h, with both inner products
        // evaluated by the projection's quadrature rule.
        let mesh = generate_mesh(AngleCase::ThreePiOver4, 1).unwrap();
        let g = |x: [f64; 3]| (3.0 * x[0]).sin() + x[1] * x[1] - 0.25 * x[2];
        let degree = 4;
        let rule = TriQuadrature::with_degree(degree).unwrap();
        let g_norm = crate::fem::l2_norm_boundary(&mesh, &g, degree).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for kind in ControlSpaceKind::ALL {
            let space = build_space(&mesh, kind);
            let proj = project_boundary(&mesh, &space, &g, degree).unwrap();
            let m_q = gram(&mesh, &space);
            for _ in 0..50 {
                let qh = ControlFunction::new(
                    &space,
                    (0..space.dof_count)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect(),
                );
                // (g, q_h) by quadrature.
                let mut g_qh = 0.0;
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
                        g_qh += w * scale * g(x) * qh.eval_on_face(&space, &mesh, fi, *bary);
                    }
                }
                // (pi_h g, q_h) via the Gram matrix.
                let proj_qh =
                    crate::fem::solve::dot(&m_q.apply_vec(&proj.coefficients), &qh.coefficients);
                let qh_norm = {
                    let mq = m_q.apply_vec(&qh.coefficients);
                    crate::fem::solve::dot(&mq, &qh.coefficients).sqrt()
                };
                assert!(
                    (g_qh - proj_qh).abs() <= 1e-9 * (1.0 + g_norm) * (1.0 + qh_norm),
                    "{kind:?}: residual {}",
                    g_qh - proj_qh
                );
            }
        }
    }

    #[test]
    fn projection_is_best_approximation() {
        let mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        let g = |x: [f64; 3]| x[0] * x[0] - 0.7 * x[1] + (x[2] * 2.0).cos();
        let degree = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for kind in ControlSpaceKind::ALL {
            let space = build_space(&mesh, kind);
            let proj = project_boundary(&mesh, &space, &g, degree).unwrap();
            let best = l2_error_boundary_control(&mesh, &space, &proj, &g, degree).unwrap();
            for _ in 0..20 {
                let competitor = ControlFunction::new(
                    &space,
                    proj.coefficients
                        .iter()
                        .map(|&c| c + rng.random_range(-0.5..0.5))
                        .collect(),
                );
                let err =
                    l2_error_boundary_control(&mesh, &space, &competitor, &g, degree).unwrap();
                assert!(best <= err + 1e-10);
            }
        }
    }
}
