//! Triangle meshes on the unit sphere: the icosahedron, midpoint
//! subdivision and the hemisphere cut.

use std::collections::HashMap;

use nalgebra::{Rotation3, Unit, Vector3};

use crate::error::{Error, Result};

/// Deepest subdivision accepted by [`subdivide`]; level 8 already has
/// 20 · 4⁸ ≈ 1.3M faces.
pub const MAX_SUBDIVISION: u32 = 8;

/// Which feature of the icosahedron sits on the pole axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PoleAlignment {
    /// A vertex at the pole. The level-0 upper hemisphere has 10 faces
    /// and every θ ring has a multiple of five faces.
    Vertex,
    /// The midpoint of an edge on the pole axis (the golden-rectangle
    /// layout `(0, ±1, ±φ)`). The level-2 upper hemisphere has a θ cut
    /// holding exactly 44 faces.
    #[default]
    Edge,
}

impl std::str::FromStr for PoleAlignment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vertex" => Ok(PoleAlignment::Vertex),
            "edge" => Ok(PoleAlignment::Edge),
            other => Err(format!("unknown pole alignment `{other}` (expected vertex|edge)")),
        }
    }
}

impl std::fmt::Display for PoleAlignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoleAlignment::Vertex => "vertex",
            PoleAlignment::Edge => "edge",
        })
    }
}

/// A triangulated piece of the unit sphere.
///
/// Faces are counter-clockwise seen from outside the sphere and
/// `adjacency[f]` lists the faces sharing an edge with `f`, in ascending
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    adjacency: Vec<Vec<usize>>,
}

impl TriMesh {
    /// Builds a mesh, normalizing vertices, orienting faces outward and
    /// computing adjacency.
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Self {
        let vertices: Vec<_> = vertices.into_iter().map(|v| v.normalize()).collect();
        let faces = faces
            .into_iter()
            .map(|[a, b, c]| {
                let normal = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
                let centroid = vertices[a] + vertices[b] + vertices[c];
                if normal.dot(&centroid) < 0.0 {
                    [a, c, b]
                } else {
                    [a, b, c]
                }
            })
            .collect::<Vec<_>>();
        let adjacency = build_adjacency(&faces);
        TriMesh {
            vertices,
            faces,
            adjacency,
        }
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Planar centroid of a face (inside the sphere, not normalized).
    pub fn centroid(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[face];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Unit direction through the centroid of a face.
    pub fn face_direction(&self, face: usize) -> Vector3<f64> {
        self.centroid(face).normalize()
    }

    /// Number of distinct edges.
    pub fn edge_count(&self) -> usize {
        edge_faces(&self.faces).len()
    }

    /// Edges used by exactly one face.
    pub fn boundary_edge_count(&self) -> usize {
        edge_faces(&self.faces)
            .values()
            .filter(|f| f.len() == 1)
            .count()
    }

    /// Faces incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut incident = vec![Vec::new(); self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            for &v in face {
                incident[v].push(f);
            }
        }
        incident
    }

    /// Applies a rotation to every vertex.
    pub fn rotated(&self, rotation: &Rotation3<f64>) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| rotation * v).collect(),
            faces: self.faces.clone(),
            adjacency: self.adjacency.clone(),
        }
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn edge_faces(faces: &[[usize; 3]]) -> HashMap<(usize, usize), Vec<usize>> {
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, &[a, b, c]) in faces.iter().enumerate() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            edges.entry(edge_key(u, v)).or_default().push(f);
        }
    }
    edges
}

fn build_adjacency(faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); faces.len()];
    for shared in edge_faces(faces).values() {
        for &f in shared {
            for &g in shared {
                if f != g {
                    adjacency[f].push(g);
                }
            }
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    adjacency
}

/// Faces of a convex set of 12 icosahedron vertices: every triple whose
/// three sides have the minimal edge length.
fn icosahedron_faces(vertices: &[Vector3<f64>]) -> Vec<[usize; 3]> {
    let edge = (1..vertices.len())
        .map(|i| (vertices[0] - vertices[i]).norm())
        .fold(f64::MAX, f64::min);
    let is_edge = |a: usize, b: usize| ((vertices[a] - vertices[b]).norm() - edge).abs() < 1e-9;
    let n = vertices.len();
    let mut faces = Vec::with_capacity(20);
    for a in 0..n {
        for b in a + 1..n {
            if !is_edge(a, b) {
                continue;
            }
            for c in b + 1..n {
                if is_edge(a, c) && is_edge(b, c) {
                    faces.push([a, b, c]);
                }
            }
        }
    }
    faces
}

/// The regular icosahedron inscribed in the unit sphere with a vertex at
/// the north pole `+z`.
pub fn build_icosahedron() -> TriMesh {
    build_icosahedron_aligned(PoleAlignment::Vertex)
}

/// The regular icosahedron with the requested feature on the `+z` axis.
pub fn build_icosahedron_aligned(alignment: PoleAlignment) -> TriMesh {
    let vertices = match alignment {
        PoleAlignment::Vertex => {
            let z = 1.0 / 5f64.sqrt();
            let rho = 2.0 / 5f64.sqrt();
            let ring = |offset: f64, z: f64| {
                (0..5).map(move |k| {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / 5.0 + offset;
                    Vector3::new(rho * phi.cos(), rho * phi.sin(), z)
                })
            };
            std::iter::once(Vector3::z())
                .chain(ring(0.0, z))
                .chain(ring(std::f64::consts::PI / 5.0, -z))
                .chain(std::iter::once(-Vector3::z()))
                .collect::<Vec<_>>()
        }
        PoleAlignment::Edge => {
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            let mut vertices = Vec::with_capacity(12);
            for a in [1.0, -1.0] {
                for b in [phi, -phi] {
                    vertices.push(Vector3::new(0.0, a, b));
                    vertices.push(Vector3::new(a, b, 0.0));
                    vertices.push(Vector3::new(b, 0.0, a));
                }
            }
            vertices
        }
    };
    let vertices: Vec<_> = vertices.into_iter().map(|v| v.normalize()).collect();
    let faces = icosahedron_faces(&vertices);
    TriMesh::new(vertices, faces)
}

/// Rotation taking `+z` onto `up`.
pub fn pole_rotation(up: &Unit<Vector3<f64>>) -> Rotation3<f64> {
    Rotation3::rotation_between(&Vector3::z(), up)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI))
}

/// Splits every face into four by joining its edge midpoints, projecting
/// the new vertices back onto the sphere. Repeated `levels` times.
pub fn subdivide(mesh: &TriMesh, levels: u32) -> Result<TriMesh> {
    if levels > MAX_SUBDIVISION {
        return Err(Error::SubdivisionTooDeep(levels));
    }
    let mut vertices = mesh.vertices.clone();
    let mut faces = mesh.faces.clone();
    for _ in 0..levels {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 2);
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| {
            *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    Ok(TriMesh::new(vertices, faces))
}

/// Keeps the faces whose centroid lies strictly above the plane through
/// the sphere center with normal `up`. Unused vertices are dropped; the
/// survivors keep their relative order.
pub fn restrict_hemisphere(mesh: &TriMesh, up: &Unit<Vector3<f64>>) -> TriMesh {
    const EQUATOR_EPS: f64 = 1e-12;
    let kept: Vec<[usize; 3]> = (0..mesh.face_count())
        .filter(|&f| mesh.centroid(f).dot(up) > EQUATOR_EPS)
        .map(|f| mesh.faces[f])
        .collect();
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    for &v in kept.iter().flatten() {
        remap[v] = 0;
    }
    let mut vertices = Vec::new();
    for (old, slot) in remap.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = vertices.len();
            vertices.push(mesh.vertices[old]);
        }
    }
    let faces = kept
        .into_iter()
        .map(|[a, b, c]| [remap[a], remap[b], remap[c]])
        .collect();
    TriMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_up() -> Unit<Vector3<f64>> {
        Vector3::z_axis()
    }

    #[test]
    fn icosahedron_combinatorics() {
        for alignment in [PoleAlignment::Vertex, PoleAlignment::Edge] {
            let mesh = build_icosahedron_aligned(alignment);
            assert_eq!(mesh.vertices().len(), 12);
            assert_eq!(mesh.face_count(), 20);
            assert_eq!(mesh.edge_count(), 30);
            assert_eq!(mesh.boundary_edge_count(), 0);
            assert!(mesh.adjacency().iter().all(|a| a.len() == 3));
        }
    }

    #[test]
    fn vertex_alignment_has_pole_vertex() {
        let mesh = build_icosahedron();
        assert_eq!(mesh.vertices()[0], Vector3::z());
    }

    #[test]
    fn edge_alignment_has_pole_edge() {
        let mesh = build_icosahedron_aligned(PoleAlignment::Edge);
        let z_max = mesh.vertices().iter().map(|w| w.z).fold(f64::MIN, f64::max);
        let top: Vec<_> = mesh
            .vertices()
            .iter()
            .filter(|v| (v.z - z_max).abs() < 1e-12)
            .collect();
        assert_eq!(top.len(), 2);
        let mid = (top[0] + top[1]).normalize();
        assert!((mid - Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn centroids_are_well_separated() {
        let mesh = build_icosahedron();
        let dirs: Vec<_> = (0..20).map(|f| mesh.face_direction(f)).collect();
        for i in 0..20 {
            for j in i + 1..20 {
                let angle = dirs[i].dot(&dirs[j]).clamp(-1.0, 1.0).acos();
                assert!(angle >= 0.7, "faces {i},{j} only {angle} rad apart");
            }
        }
    }

    #[test]
    fn faces_are_outward() {
        let mesh = subdivide(&build_icosahedron(), 2).unwrap();
        for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
            let v = mesh.vertices();
            let n = (v[b] - v[a]).cross(&(v[c] - v[a]));
            assert!(n.dot(&mesh.centroid(f)) > 0.0);
        }
    }

    #[test]
    fn subdivision_counts() {
        let ico = build_icosahedron();
        assert_eq!(subdivide(&ico, 0).unwrap().face_count(), 20);
        assert_eq!(subdivide(&ico, 2).unwrap().face_count(), 320);
        let half = restrict_hemisphere(&ico, &z_up());
        assert_eq!(subdivide(&half, 2).unwrap().face_count(), 160);
        assert!(matches!(subdivide(&ico, 9), Err(Error::SubdivisionTooDeep(9))));
    }

    #[test]
    fn subdivided_vertices_are_unit() {
        let mesh = subdivide(&build_icosahedron_aligned(PoleAlignment::Edge), 3).unwrap();
        for v in mesh.vertices() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(mesh.boundary_edge_count(), 0);
        assert!(mesh.adjacency().iter().all(|a| a.len() == 3));
    }

    #[test]
    fn hemisphere_cuts() {
        let ico = build_icosahedron();
        assert_eq!(restrict_hemisphere(&ico, &z_up()).face_count(), 10);
        let l2 = subdivide(&ico, 2).unwrap();
        let up = restrict_hemisphere(&l2, &z_up());
        let down = restrict_hemisphere(&l2, &-z_up());
        assert_eq!(up.face_count(), 160);
        assert_eq!(down.face_count(), 160);
        // complementary: no centroid shared between the two halves
        for f in 0..up.face_count() {
            let c = up.centroid(f);
            assert!(c.z > 0.0);
            assert!((0..down.face_count()).all(|g| (down.centroid(g) - c).norm() > 1e-9));
        }
    }

    #[test]
    fn edge_aligned_level0_keeps_eight_faces() {
        let ico = build_icosahedron_aligned(PoleAlignment::Edge);
        assert_eq!(restrict_hemisphere(&ico, &z_up()).face_count(), 8);
    }
}
