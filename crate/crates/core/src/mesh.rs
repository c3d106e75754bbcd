//! Structured tetrahedral meshes of the prism domains.
//!
//! The domain is the prism `Omega_omega = C_omega x (0,1)` whose cross
//! section `C_omega` is the intersection of the square `(-1,1)^2` with the
//! sector `0 < phi < omega`, a convex quadrilateral with corner `(0,0)` on
//! the singular vertical edge. Meshes are generated at refinement level
//! `l` by red-refining the two base triangles of the cross section
//! (`n = 2^l` subdivisions per direction), extruding each small triangle
//! into `n` layers, and splitting every prism into three tetrahedra with
//! a diagonal rule keyed on global vertex indices so that neighbouring
//! prisms conform.
//!
//! All lattice bookkeeping is integer-exact: a 2D vertex is identified by
//! its integer barycentric coefficients over the four quadrilateral
//! corners, so vertex dedup needs no floating tolerance and edge lengths
//! halve bit-exactly from one level to the next.

use std::collections::HashMap;
use std::fmt;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Hard cap on generated vertices; levels beyond this are refused.
const MAX_VERTICES: usize = 5_000_000;

/// Quasi-uniformity bound checked by [`validate`]: (max edge)/(min edge).
const EDGE_RATIO_BOUND: f64 = 10.0;

/// The three supported interior edge angles at the singular edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AngleCase {
    /// omega = pi/2 (the unit cube), lambda = 2
    PiOver2,
    /// omega = 2*pi/3, lambda = 3/2
    TwoPiOver3,
    /// omega = 3*pi/4, lambda = 4/3
    ThreePiOver4,
}

impl AngleCase {
    pub const ALL: [AngleCase; 3] = [
        AngleCase::PiOver2,
        AngleCase::TwoPiOver3,
        AngleCase::ThreePiOver4,
    ];

    /// Interior edge angle omega in radians.
    pub fn omega(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            AngleCase::PiOver2 => PI / 2.0,
            AngleCase::TwoPiOver3 => 2.0 * PI / 3.0,
            AngleCase::ThreePiOver4 => 3.0 * PI / 4.0,
        }
    }

    /// Singular exponent lambda = pi/omega.
    pub fn lambda(self) -> f64 {
        match self {
            AngleCase::PiOver2 => 2.0,
            AngleCase::TwoPiOver3 => 1.5,
            AngleCase::ThreePiOver4 => 4.0 / 3.0,
        }
    }

    /// cot(omega), the x-coordinate where the ray `phi = omega` meets
    /// `y = 1`. Exact values, not trigonometric evaluations: 0 for pi/2,
    /// -1/sqrt(3) for 2pi/3, -1 for 3pi/4.
    pub fn cot(self) -> f64 {
        match self {
            AngleCase::PiOver2 => 0.0,
            AngleCase::TwoPiOver3 => -1.0 / 3.0_f64.sqrt(),
            AngleCase::ThreePiOver4 => -1.0,
        }
    }

    /// Cross-section area (2 - cot(omega)) / 2 from the shoelace formula.
    pub fn cross_section_area(self) -> f64 {
        (2.0 - self.cot()) / 2.0
    }

    /// Perimeter of the cross-section quadrilateral.
    pub fn cross_section_perimeter(self) -> f64 {
        let c = self.cot();
        3.0 - c + (1.0 + c * c).sqrt()
    }

    /// Total boundary area of the prism: two caps plus the extruded
    /// perimeter (height 1).
    pub fn boundary_area(self) -> f64 {
        2.0 * self.cross_section_area() + self.cross_section_perimeter()
    }

    /// Short CLI label.
    pub fn label(self) -> &'static str {
        match self {
            AngleCase::PiOver2 => "pi2",
            AngleCase::TwoPiOver3 => "2pi3",
            AngleCase::ThreePiOver4 => "3pi4",
        }
    }

    pub fn from_label(s: &str) -> Result<AngleCase> {
        match s {
            "pi2" => Ok(AngleCase::PiOver2),
            "2pi3" => Ok(AngleCase::TwoPiOver3),
            "3pi4" => Ok(AngleCase::ThreePiOver4),
            other => Err(Error::Config(format!(
                "unsupported angle '{other}' (expected pi2, 2pi3 or 3pi4)"
            ))),
        }
    }
}

impl fmt::Display for AngleCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Planar cross section of the prism: quadrilateral corners and the two
/// base triangles used for refinement.
#[derive(Debug, Clone)]
pub struct CrossSection {
    /// Ordered corners (0,0), (1,0), (1,1), (cot omega, 1); positively
    /// oriented, corner 0 on the singular edge.
    pub vertices: [[f64; 2]; 4],
    /// Base triangulation (indices into `vertices`).
    pub triangles: [[usize; 3]; 2],
}

/// Builds the cross section of `Omega_omega`.
pub fn build_cross_section(omega: AngleCase) -> CrossSection {
    let c = omega.cot();
    CrossSection {
        vertices: [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [c, 1.0]],
        triangles: [[0, 1, 2], [0, 2, 3]],
    }
}

/// The six flat facets of the prism boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Facet {
    /// Sector side phi = 0, i.e. the plane y = 0.
    Y0,
    /// Side x = 1.
    X1,
    /// Side y = 1.
    Y1,
    /// Sector side phi = omega (x = 0 for the cube).
    Omega,
    /// Bottom cap z = 0.
    Z0,
    /// Top cap z = 1.
    Z1,
}

impl Facet {
    pub const ALL: [Facet; 6] = [
        Facet::Y0,
        Facet::X1,
        Facet::Y1,
        Facet::Omega,
        Facet::Z0,
        Facet::Z1,
    ];

    /// Analytic facet area for the given angle case.
    pub fn area(self, omega: AngleCase) -> f64 {
        let c = omega.cot();
        match self {
            Facet::Y0 | Facet::X1 => 1.0,
            Facet::Y1 => 1.0 - c,
            Facet::Omega => (1.0 + c * c).sqrt(),
            Facet::Z0 | Facet::Z1 => omega.cross_section_area(),
        }
    }

    /// Outward unit normal of the facet.
    pub fn outward_normal(self, omega: AngleCase) -> [f64; 3] {
        let w = omega.omega();
        match self {
            Facet::Y0 => [0.0, -1.0, 0.0],
            Facet::X1 => [1.0, 0.0, 0.0],
            Facet::Y1 => [0.0, 1.0, 0.0],
            Facet::Omega => [-w.sin(), w.cos(), 0.0],
            Facet::Z0 => [0.0, 0.0, -1.0],
            Facet::Z1 => [0.0, 0.0, 1.0],
        }
    }
}

/// One boundary triangle of the mesh.
#[derive(Debug, Clone)]
pub struct BoundaryFace {
    /// Index of the unique tet owning this face.
    pub tet: usize,
    /// Local face index in the tet (face k is opposite vertex k).
    pub local_face: usize,
    /// Vertex indices, ordered so the right-hand normal points outward.
    pub vertices: [usize; 3],
    /// Flat facet this face lies on.
    pub facet: Facet,
    /// Face area.
    pub area: f64,
}

/// Integer lattice key of a vertex: barycentric coefficients over the
/// four cross-section corners (summing to n) plus the z-layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct LatticeKey {
    pub coeffs: [u32; 4],
    pub layer: u32,
}

/// Conforming tetrahedral mesh of a prism domain.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub omega: AngleCase,
    /// Refinement level; n = 2^level subdivisions per direction.
    pub level: u32,
    pub n: usize,
    /// Mesh size: maximum edge length.
    pub h: f64,
    /// Minimum edge length (for the quasi-uniformity check).
    pub min_edge: f64,
    pub vertices: Vec<[f64; 3]>,
    /// Tets with positive signed volume.
    pub tets: Vec<[usize; 4]>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub(crate) lattice: Vec<LatticeKey>,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    /// Coordinates of the four corners of tet `t`.
    pub fn tet_coords(&self, t: usize) -> [[f64; 3]; 4] {
        let tet = self.tets[t];
        [
            self.vertices[tet[0]],
            self.vertices[tet[1]],
            self.vertices[tet[2]],
            self.vertices[tet[3]],
        ]
    }

    /// Signed volume of tet `t` (positive for well-oriented tets).
    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_coords(t))
    }

    /// Sum of tet volumes.
    pub fn volume(&self) -> f64 {
        (0..self.n_tets()).map(|t| self.tet_volume(t)).sum()
    }

    /// Sum of boundary face areas.
    pub fn boundary_area(&self) -> f64 {
        self.boundary_faces.iter().map(|f| f.area).sum()
    }

    /// Vertex indices that lie on the boundary, ascending.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut on_boundary = vec![false; self.n_vertices()];
        for face in &self.boundary_faces {
            for &v in &face.vertices {
                on_boundary[v] = true;
            }
        }
        (0..self.n_vertices()).filter(|&v| on_boundary[v]).collect()
    }

    /// Writes a plain-text dump: vertex count, one `x y z` line per vertex
    /// (full double precision), tet count, one `a b c d` index line per tet.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "vertices {}", self.n_vertices())?;
        for v in &self.vertices {
            writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2])?;
        }
        writeln!(out, "tets {}", self.n_tets())?;
        for t in &self.tets {
            writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
        }
        Ok(())
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Signed volume of a tet from its corner coordinates.
pub fn signed_volume(x: &[[f64; 3]; 4]) -> f64 {
    let d1 = sub(x[1], x[0]);
    let d2 = sub(x[2], x[0]);
    let d3 = sub(x[3], x[0]);
    dot(d1, cross(d2, d3)) / 6.0
}

/// Area of a triangle from its corner coordinates.
pub fn triangle_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let n = cross(sub(b, a), sub(c, a));
    0.5 * dot(n, n).sqrt()
}

/// Local faces of a tet: face k collects the vertices opposite corner k.
const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Generates the structured mesh of `Omega_omega` at the given level.
pub fn generate_mesh(omega: AngleCase, level: u32) -> Result<Mesh> {
    if level > 25 {
        return Err(Error::Resource(format!("level {level} out of range")));
    }
    let n = 1usize << level;
    let n_vertices_2d = (n + 1) * (n + 1);
    let n_vertices = n_vertices_2d * (n + 1);
    if n_vertices > MAX_VERTICES {
        return Err(Error::Resource(format!(
            "level {level} needs {n_vertices} vertices (limit {MAX_VERTICES})"
        )));
    }

    let section = build_cross_section(omega);
    let nf = n as f64;

    // 2D lattice: dedup by exact integer key.
    let mut key_to_id: HashMap<[u32; 4], u32> = HashMap::new();
    let mut keys2d: Vec<[u32; 4]> = Vec::new();
    let mut coords2d: Vec<[f64; 2]> = Vec::new();
    let mut id_of =
        |key: [u32; 4], keys2d: &mut Vec<[u32; 4]>, coords2d: &mut Vec<[f64; 2]>| -> u32 {
            *key_to_id.entry(key).or_insert_with(|| {
                let id = keys2d.len() as u32;
                keys2d.push(key);
                coords2d.push(lattice_coords(&section, key, nf));
                id
            })
        };

    let mut tris2d: Vec<[u32; 3]> = Vec::new();
    for tri in section.triangles {
        let [a, b, c] = tri;
        let key_at = |i: usize, j: usize| {
            let mut key = [0u32; 4];
            key[a] += (n - i - j) as u32;
            key[b] += i as u32;
            key[c] += j as u32;
            key
        };
        for j in 0..=n {
            for i in 0..=(n - j) {
                id_of(key_at(i, j), &mut keys2d, &mut coords2d);
            }
        }
        for j in 0..n {
            for i in 0..(n - j) {
                let v00 = id_of(key_at(i, j), &mut keys2d, &mut coords2d);
                let v10 = id_of(key_at(i + 1, j), &mut keys2d, &mut coords2d);
                let v01 = id_of(key_at(i, j + 1), &mut keys2d, &mut coords2d);
                tris2d.push([v00, v10, v01]);
                if i + j + 2 <= n {
                    let v11 = id_of(key_at(i + 1, j + 1), &mut keys2d, &mut coords2d);
                    tris2d.push([v10, v11, v01]);
                }
            }
        }
    }
    debug_assert_eq!(keys2d.len(), n_vertices_2d);

    // 3D vertices: column-major, id = column * (n+1) + layer.
    let layers = n + 1;
    let id3 = |v2: u32, k: usize| -> usize { v2 as usize * layers + k };
    let mut vertices = Vec::with_capacity(n_vertices);
    let mut lattice = Vec::with_capacity(n_vertices);
    for (v2, &xy) in coords2d.iter().enumerate() {
        for k in 0..layers {
            vertices.push([xy[0], xy[1], k as f64 / nf]);
            lattice.push(LatticeKey {
                coeffs: keys2d[v2],
                layer: k as u32,
            });
        }
    }

    // Prism split: columns sorted by 2D id fix the quad-face diagonals,
    // so adjacent prisms agree on them.
    let mut tets: Vec<[usize; 4]> = Vec::with_capacity(tris2d.len() * n * 3);
    for tri in &tris2d {
        let mut cols = *tri;
        cols.sort_unstable();
        for k in 0..n {
            let b = [id3(cols[0], k), id3(cols[1], k), id3(cols[2], k)];
            let t = [
                id3(cols[0], k + 1),
                id3(cols[1], k + 1),
                id3(cols[2], k + 1),
            ];
            for tet in [
                [b[0], b[1], b[2], t[0]],
                [b[1], b[2], t[0], t[1]],
                [b[2], t[0], t[1], t[2]],
            ] {
                tets.push(orient_positive(tet, &vertices)?);
            }
        }
    }

    // Boundary faces: those appearing in exactly one tet.
    let mut face_count: HashMap<[usize; 3], u8> = HashMap::with_capacity(tets.len() * 2);
    for tet in &tets {
        for local in TET_FACES {
            let mut f = [tet[local[0]], tet[local[1]], tet[local[2]]];
            f.sort_unstable();
            *face_count.entry(f).or_insert(0) += 1;
        }
    }
    let mut boundary_faces = Vec::new();
    for (ti, tet) in tets.iter().enumerate() {
        for (li, local) in TET_FACES.iter().enumerate() {
            let mut key = [tet[local[0]], tet[local[1]], tet[local[2]]];
            key.sort_unstable();
            if face_count[&key] == 1 {
                let opposite = tet[li];
                let oriented = orient_outward(
                    [tet[local[0]], tet[local[1]], tet[local[2]]],
                    opposite,
                    &vertices,
                );
                let facet = classify_facet(&oriented, &lattice, n as u32)?;
                let area = triangle_area(
                    vertices[oriented[0]],
                    vertices[oriented[1]],
                    vertices[oriented[2]],
                );
                boundary_faces.push(BoundaryFace {
                    tet: ti,
                    local_face: li,
                    vertices: oriented,
                    facet,
                    area,
                });
            }
        }
    }

    // Edge extrema from integer lattice differences: the same difference
    // classes recur at every level, so h halves exactly under refinement.
    let mut max_sq: f64 = 0.0;
    let mut min_sq: f64 = f64::INFINITY;
    for tet in &tets {
        for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            let sq = edge_length_sq(&section, &lattice[tet[a]], &lattice[tet[b]], nf);
            max_sq = max_sq.max(sq);
            min_sq = min_sq.min(sq);
        }
    }

    Ok(Mesh {
        omega,
        level,
        n,
        h: max_sq.sqrt(),
        min_edge: min_sq.sqrt(),
        vertices,
        tets,
        boundary_faces,
        lattice,
    })
}

/// Physical coordinates of a lattice key (corner 0 is the origin).
fn lattice_coords(section: &CrossSection, key: [u32; 4], nf: f64) -> [f64; 2] {
    let mut x = 0.0;
    let mut y = 0.0;
    for corner in 1..4 {
        let w = key[corner] as f64;
        x += w * section.vertices[corner][0];
        y += w * section.vertices[corner][1];
    }
    [x / nf, y / nf]
}

/// Squared edge length from integer key differences (exact under the
/// level-halving scaling).
fn edge_length_sq(section: &CrossSection, a: &LatticeKey, b: &LatticeKey, nf: f64) -> f64 {
    let mut dx = 0.0;
    let mut dy = 0.0;
    for corner in 1..4 {
        let d = a.coeffs[corner] as f64 - b.coeffs[corner] as f64;
        dx += d * section.vertices[corner][0];
        dy += d * section.vertices[corner][1];
    }
    let dz = a.layer as f64 - b.layer as f64;
    let (dx, dy, dz) = (dx / nf, dy / nf, dz / nf);
    dx * dx + dy * dy + dz * dz
}

fn orient_positive(mut tet: [usize; 4], vertices: &[[f64; 3]]) -> Result<[usize; 4]> {
    let coords = [
        vertices[tet[0]],
        vertices[tet[1]],
        vertices[tet[2]],
        vertices[tet[3]],
    ];
    let vol = signed_volume(&coords);
    if vol == 0.0 {
        return Err(Error::Assembly("degenerate tet in mesh generation".into()));
    }
    if vol < 0.0 {
        tet.swap(2, 3);
    }
    Ok(tet)
}

/// Orders a boundary face so its right-hand normal points away from the
/// opposite tet vertex.
fn orient_outward(mut face: [usize; 3], opposite: usize, vertices: &[[f64; 3]]) -> [usize; 3] {
    let a = vertices[face[0]];
    let n = cross(sub(vertices[face[1]], a), sub(vertices[face[2]], a));
    if dot(n, sub(vertices[opposite], a)) > 0.0 {
        face.swap(1, 2);
    }
    face
}

/// Assigns a boundary face to its flat facet using the exact lattice keys.
fn classify_facet(face: &[usize; 3], lattice: &[LatticeKey], n: u32) -> Result<Facet> {
    let keys = [lattice[face[0]], lattice[face[1]], lattice[face[2]]];
    if keys.iter().all(|k| k.layer == 0) {
        return Ok(Facet::Z0);
    }
    if keys.iter().all(|k| k.layer == n) {
        return Ok(Facet::Z1);
    }
    // Side facets: a face lies on the facet spanned by two cross-section
    // corners iff the other two barycentric coefficients vanish.
    let all_zero = |a: usize, b: usize| keys.iter().all(|k| k.coeffs[a] == 0 && k.coeffs[b] == 0);
    let mut hit = None;
    for (facet, a, b) in [
        (Facet::Y0, 2, 3),
        (Facet::X1, 0, 3),
        (Facet::Y1, 0, 1),
        (Facet::Omega, 1, 2),
    ] {
        if all_zero(a, b) {
            if hit.is_some() {
                return Err(Error::Assembly("boundary face matched two facets".into()));
            }
            hit = Some(facet);
        }
    }
    hit.ok_or_else(|| Error::Assembly("boundary face on no facet".into()))
}

/// Mesh validation report: all invariant violations found, plus summary
/// quantities. An empty violation list means the mesh passed.
#[derive(Debug)]
pub struct MeshDiagnostics {
    pub violations: Vec<String>,
    pub volume: f64,
    pub boundary_area: f64,
    pub edge_ratio: f64,
}

impl MeshDiagnostics {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<&str> {
        self.violations.first().map(|s| s.as_str())
    }
}

/// Checks every mesh invariant: positive orientation, interior faces
/// shared by exactly two tets, quasi-uniformity, volume and boundary-area
/// identities, outward face normals and the facet partition of the
/// boundary.
pub fn validate(mesh: &Mesh) -> MeshDiagnostics {
    let mut violations = Vec::new();

    for (t, _) in mesh.tets.iter().enumerate() {
        if mesh.tet_volume(t) <= 0.0 {
            violations.push(format!("orientation: tet {t} has non-positive volume"));
            break;
        }
    }

    // Face sharing: every face on 1 (boundary) or 2 (interior) tets.
    let mut face_count: HashMap<[usize; 3], u8> = HashMap::new();
    for tet in &mesh.tets {
        for local in TET_FACES {
            let mut f = [tet[local[0]], tet[local[1]], tet[local[2]]];
            f.sort_unstable();
            *face_count.entry(f).or_insert(0) += 1;
        }
    }
    if let Some((face, count)) = face_count.iter().find(|&(_, &c)| c > 2) {
        violations.push(format!(
            "conformity: face {face:?} shared by {count} tets (expected at most 2)"
        ));
    }
    let n_single = face_count.values().filter(|&&c| c == 1).count();
    if n_single != mesh.boundary_faces.len() {
        violations.push(format!(
            "boundary: {} faces on one tet but {} recorded boundary faces",
            n_single,
            mesh.boundary_faces.len()
        ));
    }

    let ratio = mesh.h / mesh.min_edge;
    if ratio.is_nan() || ratio > EDGE_RATIO_BOUND {
        violations.push(format!(
            "quasi-uniformity: edge ratio {ratio} exceeds {EDGE_RATIO_BOUND}"
        ));
    }

    let volume = mesh.volume();
    let exact_volume = mesh.omega.cross_section_area();
    if (volume - exact_volume).abs() > 1e-12 * exact_volume {
        violations.push(format!("volume: sum {volume} vs analytic {exact_volume}"));
    }

    let boundary_area = mesh.boundary_area();
    let exact_area = mesh.omega.boundary_area();
    if (boundary_area - exact_area).abs() > 1e-12 * exact_area {
        violations.push(format!(
            "boundary area: sum {boundary_area} vs analytic {exact_area}"
        ));
    }

    // Outward normals: away from the owning tet's centroid.
    for (i, face) in mesh.boundary_faces.iter().enumerate() {
        let a = mesh.vertices[face.vertices[0]];
        let n = cross(
            sub(mesh.vertices[face.vertices[1]], a),
            sub(mesh.vertices[face.vertices[2]], a),
        );
        let tet = mesh.tets[face.tet];
        let mut centroid = [0.0; 3];
        for &v in &tet {
            for d in 0..3 {
                centroid[d] += mesh.vertices[v][d] / 4.0;
            }
        }
        if dot(n, sub(centroid, a)) >= 0.0 {
            violations.push(format!("normal: boundary face {i} not outward"));
            break;
        }
    }

    // Facet classification agrees with the exact lattice keys.
    for (i, face) in mesh.boundary_faces.iter().enumerate() {
        match classify_facet(&face.vertices, &mesh.lattice, mesh.n as u32) {
            Ok(facet) if facet == face.facet => {}
            other => {
                violations.push(format!(
                    "facet: boundary face {i} recorded as {:?} but classifies as {other:?}",
                    face.facet
                ));
                break;
            }
        }
    }

    // Facet partition: per-facet area sums match the analytic values.
    for facet in Facet::ALL {
        let sum: f64 = mesh
            .boundary_faces
            .iter()
            .filter(|f| f.facet == facet)
            .map(|f| f.area)
            .sum();
        let exact = facet.area(mesh.omega);
        if (sum - exact).abs() > 1e-12 * exact {
            violations.push(format!(
                "facet {facet:?}: area sum {sum} vs analytic {exact}"
            ));
        }
    }

    MeshDiagnostics {
        violations,
        volume,
        boundary_area,
        edge_ratio: ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shoelace signed area of a planar polygon (independent oracle).
    fn shoelace(vertices: &[[f64; 2]]) -> f64 {
        let n = vertices.len();
        let mut twice = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            twice += vertices[i][0] * vertices[j][1] - vertices[j][0] * vertices[i][1];
        }
        twice / 2.0
    }

    #[test]
    fn cross_section_pi2_is_unit_square() {
        let cs = build_cross_section(AngleCase::PiOver2);
        assert_eq!(cs.vertices[0], [0.0, 0.0]);
        assert_eq!(cs.vertices[1], [1.0, 0.0]);
        assert_eq!(cs.vertices[2], [1.0, 1.0]);
        assert_eq!(cs.vertices[3], [0.0, 1.0]);
        assert!((shoelace(&cs.vertices) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cross_section_3pi4_fourth_vertex() {
        let cs = build_cross_section(AngleCase::ThreePiOver4);
        assert_eq!(cs.vertices[3], [-1.0, 1.0]);
        assert!((shoelace(&cs.vertices) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn cross_section_2pi3_fourth_vertex() {
        let cs = build_cross_section(AngleCase::TwoPiOver3);
        assert!((cs.vertices[3][0] - (-0.5773502691896258)).abs() < 1e-15);
        assert_eq!(cs.vertices[3][1], 1.0);
        let area = shoelace(&cs.vertices);
        assert!((area - (2.0 + 1.0 / 3.0_f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((area - 1.2886751345948129).abs() < 1e-12);
        // Shoelace agrees with the closed form used everywhere else.
        assert!((area - AngleCase::TwoPiOver3.cross_section_area()).abs() < 1e-15);
    }

    #[test]
    fn cross_sections_are_convex_and_positive() {
        for omega in AngleCase::ALL {
            let cs = build_cross_section(omega);
            assert!(shoelace(&cs.vertices) > 0.0);
            for i in 0..4 {
                let a = cs.vertices[i];
                let b = cs.vertices[(i + 1) % 4];
                let c = cs.vertices[(i + 2) % 4];
                let turn = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                assert!(turn > 0.0, "non-convex corner at {i} for {omega}");
            }
        }
    }

    #[test]
    fn lambda_is_pi_over_omega() {
        for omega in AngleCase::ALL {
            let expected = std::f64::consts::PI / omega.omega();
            assert!((omega.lambda() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn cube_mesh_counts() {
        for level in 0..=2u32 {
            let n = 1usize << level;
            let mesh = generate_mesh(AngleCase::PiOver2, level).unwrap();
            assert_eq!(mesh.n_vertices(), (n + 1) * (n + 1) * (n + 1));
            assert_eq!(mesh.n_tets(), 6 * n * n * n);
        }
    }

    #[test]
    fn cube_volume_is_one() {
        for level in 0..=2u32 {
            let mesh = generate_mesh(AngleCase::PiOver2, level).unwrap();
            assert!((mesh.volume() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn volumes_match_cross_section_area_times_height() {
        for omega in AngleCase::ALL {
            for level in 0..=3u32 {
                let mesh = generate_mesh(omega, level).unwrap();
                let exact = omega.cross_section_area();
                assert!(
                    (mesh.volume() - exact).abs() <= 1e-12 * exact,
                    "volume mismatch for {omega} level {level}"
                );
            }
        }
    }

    #[test]
    fn boundary_area_3pi4_closed_form() {
        // Caps: 2 * 3/2. Sides: 1 + 1 + 2 + sqrt(2). Total 7 + sqrt(2).
        let exact = 7.0 + 2.0_f64.sqrt();
        assert!((AngleCase::ThreePiOver4.boundary_area() - exact).abs() < 1e-15);
        let mesh = generate_mesh(AngleCase::ThreePiOver4, 2).unwrap();
        assert!((mesh.boundary_area() - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn meshes_validate_clean() {
        for omega in AngleCase::ALL {
            for level in 0..=3u32 {
                let mesh = generate_mesh(omega, level).unwrap();
                let diag = validate(&mesh);
                assert!(
                    diag.pass(),
                    "{omega} level {level}: {:?}",
                    diag.first_violation()
                );
            }
        }
    }

    #[test]
    fn h_halves_exactly_between_levels() {
        for omega in AngleCase::ALL {
            let mut prev: Option<f64> = None;
            for level in 0..=4u32 {
                let mesh = generate_mesh(omega, level).unwrap();
                if let Some(ph) = prev {
                    assert_eq!(mesh.h, ph / 2.0, "h not halved exactly for {omega}");
                }
                prev = Some(mesh.h);
            }
        }
    }

    #[test]
    fn permuted_tet_fails_orientation() {
        let mut mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        mesh.tets[0].swap(0, 1);
        let diag = validate(&mesh);
        assert!(!diag.pass());
        assert!(diag.first_violation().unwrap().contains("orientation"));
    }

    #[test]
    fn duplicated_tet_fails_conformity() {
        let mut mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        let dup = mesh.tets[0];
        mesh.tets.push(dup);
        let diag = validate(&mesh);
        assert!(!diag.pass());
        assert!(diag
            .violations
            .iter()
            .any(|v| v.contains("conformity") || v.contains("shared by")));
    }

    #[test]
    fn level0_vertices_all_on_boundary() {
        for omega in AngleCase::ALL {
            let mesh = generate_mesh(omega, 0).unwrap();
            assert_eq!(mesh.boundary_vertices().len(), mesh.n_vertices());
        }
    }

    #[test]
    fn facet_partition_per_level() {
        let mesh = generate_mesh(AngleCase::TwoPiOver3, 2).unwrap();
        for facet in Facet::ALL {
            let sum: f64 = mesh
                .boundary_faces
                .iter()
                .filter(|f| f.facet == facet)
                .map(|f| f.area)
                .sum();
            let exact = facet.area(mesh.omega);
            assert!(
                (sum - exact).abs() < 1e-12 * exact,
                "facet {facet:?}: {sum} vs {exact}"
            );
        }
    }

    #[test]
    fn resource_limit_rejected() {
        assert!(matches!(
            generate_mesh(AngleCase::PiOver2, 12),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn dump_roundtrip_counts() {
        let dir = std::env::temp_dir().join("nc-mesh-dump-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.txt");
        let mesh = generate_mesh(AngleCase::PiOver2, 1).unwrap();
        mesh.write_dump(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let head = lines.next().unwrap();
        assert_eq!(head, format!("vertices {}", mesh.n_vertices()));
        let coords: Vec<&str> = lines.by_ref().take(mesh.n_vertices()).collect();
        assert_eq!(coords.len(), mesh.n_vertices());
        let first: Vec<f64> = coords[0]
            .split_whitespace()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(first, mesh.vertices[0].to_vec());
        assert_eq!(lines.next().unwrap(), format!("tets {}", mesh.n_tets()));
        std::fs::remove_file(&path).ok();
    }
}
