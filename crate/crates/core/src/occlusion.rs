//! Projection of seen voxels onto the dome and the per-viewpoint occluder
//! counts `m`.

use nalgebra::{Point3, Vector3};

use crate::dome::Dome;
use crate::grid::OccupancyGrid;

/// Number of occluding voxels projected onto each allowed viewpoint.
/// Entry `i - 1` belongs to viewpoint `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OcclusionVector {
    counts: Vec<u32>,
}

impl OcclusionVector {
    pub fn new(counts: Vec<u32>) -> Self {
        OcclusionVector { counts }
    }

    pub fn zeros(len: usize) -> Self {
        OcclusionVector {
            counts: vec![0; len],
        }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Count of viewpoint `index` (1-based).
    pub fn count(&self, index: usize) -> u32 {
        self.counts[index - 1]
    }

    /// A viewpoint is occluded once `m0` or more voxels project onto it.
    pub fn is_occluded(&self, index: usize, m0: u32) -> bool {
        self.count(index) >= m0
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Diagnostics from one projection pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProjectionStats {
    /// Seen voxels inside the dome ball and above its base plane.
    pub inside: usize,
    /// Voxels whose three nearest vertices span a mesh face.
    pub spanned: usize,
    /// Voxels landing on a face outside `theta_lim`.
    pub disallowed: usize,
}

/// Face lookup on a dome mesh.
///
/// A direction is first localized by its three nearest mesh vertices
/// (geodesic distance). The face is then the one, among all faces touching
/// those vertices, whose center is angularly closest to the direction.
#[derive(Debug, Clone)]
pub struct FaceLocator {
    vertices: Vec<Vector3<f64>>,
    face_dirs: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    vertex_faces: Vec<Vec<usize>>,
}

impl FaceLocator {
    pub fn new(dome: &Dome) -> Self {
        let mesh = dome.mesh();
        FaceLocator {
            vertices: mesh.vertices().to_vec(),
            face_dirs: (0..mesh.face_count()).map(|f| mesh.face_direction(f)).collect(),
            faces: mesh.faces().to_vec(),
            vertex_faces: mesh.vertex_faces(),
        }
    }

    /// Indices of the three vertices nearest to a unit direction, nearest
    /// first. Ties go to the lower vertex index.
    pub fn nearest_vertices(&self, dir: &Vector3<f64>) -> [usize; 3] {
        // geodesic distance is monotone decreasing in the dot product
        let mut best = [(f64::NEG_INFINITY, usize::MAX); 3];
        for (i, v) in self.vertices.iter().enumerate() {
            let dot = v.dot(dir);
            if dot > best[2].0 {
                best[2] = (dot, i);
                if best[2].0 > best[1].0 {
                    best.swap(1, 2);
                    if best[1].0 > best[0].0 {
                        best.swap(0, 1);
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }

    /// Face spanned by three vertices, if any.
    pub fn spanned_face(&self, vertices: [usize; 3]) -> Option<usize> {
        let mut key = vertices;
        key.sort_unstable();
        self.vertex_faces[vertices[0]].iter().copied().find(|&f| {
            let mut face = self.faces[f];
            face.sort_unstable();
            face == key
        })
    }

    /// Face a unit direction projects onto, and whether its three nearest
    /// vertices span a face.
    pub fn locate(&self, dir: &Vector3<f64>) -> (usize, bool) {
        let nearest = self.nearest_vertices(dir);
        let spanned = self.spanned_face(nearest).is_some();
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for &v in &nearest {
            for &f in &self.vertex_faces[v] {
                let dot = self.face_dirs[f].dot(dir);
                if dot > best.0 || (dot == best.0 && f < best.1) {
                    best = (dot, f);
                }
            }
        }
        (best.1, spanned)
    }
}

/// Direction from the dome center to `p`, if `p` lies strictly inside the
/// dome ball and strictly above its base plane.
pub fn dome_direction(dome: &Dome, p: &Point3<f64>) -> Option<Vector3<f64>> {
    let rel = p - dome.center();
    let dist = rel.norm();
    if dist == 0.0 || dist >= dome.radius() || rel.dot(dome.up()) <= 0.0 {
        return None;
    }
    Some(rel / dist)
}

/// Counts, for each allowed viewpoint, the seen voxels inside the dome
/// that project onto its face.
pub fn project_to_dome(grid: &OccupancyGrid, dome: &Dome) -> OcclusionVector {
    project_points(grid.seen_centers(), dome).0
}

/// [`project_to_dome`] over arbitrary voxel centers, with diagnostics.
pub fn project_points(centers: &[Point3<f64>], dome: &Dome) -> (OcclusionVector, ProjectionStats) {
    let locator = FaceLocator::new(dome);
    let mut counts = vec![0u32; dome.len()];
    let mut stats = ProjectionStats::default();
    for c in centers {
        let Some(dir) = dome_direction(dome, c) else {
            continue;
        };
        stats.inside += 1;
        let (face, spanned) = locator.locate(&dir);
        stats.spanned += spanned as usize;
        match dome.viewpoint_of_face(face) {
            Some(index) => counts[index - 1] += 1,
            None => stats.disallowed += 1,
        }
    }
    (OcclusionVector::new(counts), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dome::{DomeConfig, PoleAlignment, ThetaLimit};
    use crate::grid::{voxelize, GridSpec};

    fn dome() -> Dome {
        Dome::build(&DomeConfig::default()).unwrap()
    }

    #[test]
    fn nothing_inside_gives_zeros() {
        let d = dome();
        let outside = [
            Point3::new(0.0, 0.0, 0.8),
            Point3::new(0.3, 0.0, -0.1),
            Point3::new(0.2, 0.2, 0.0),
        ];
        let (m, stats) = project_points(&outside, &d);
        assert_eq!(m, OcclusionVector::zeros(44));
        assert_eq!(stats.inside, 0);
    }

    #[test]
    fn axial_voxel_hits_a_polar_face() {
        let d = Dome::build(&DomeConfig {
            alignment: PoleAlignment::Vertex,
            theta_lim: ThetaLimit::ViewpointCount(45),
            ..DomeConfig::default()
        })
        .unwrap();
        let spec = GridSpec::new(
            Point3::new(-0.01, -0.01, 0.0),
            nalgebra::Vector3::new(0.02, 0.02, 0.6),
            [1, 1, 30],
        )
        .unwrap();
        let grid = voxelize(&[Point3::new(0.0, 0.0, 0.31)], &spec);
        let m = project_to_dome(&grid, &d);
        assert_eq!(m.total(), 1);
        let hit = (1..=d.len()).find(|&i| m.count(i) == 1).unwrap();
        // the polar ring of a vertex-up dome is the first five viewpoints
        assert!(hit <= 5);
    }

    #[test]
    fn order_invariant() {
        let d = dome();
        let mut pts: Vec<_> = (0..50)
            .map(|k| {
                let a = k as f64 * 0.37;
                Point3::new(0.2 * a.cos(), 0.2 * a.sin(), 0.05 + 0.005 * k as f64)
            })
            .collect();
        let (a, _) = project_points(&pts, &d);
        pts.reverse();
        let (b, _) = project_points(&pts, &d);
        assert_eq!(a, b);
        assert!(a.total() <= 50);
    }

    #[test]
    fn face_directions_locate_themselves() {
        let d = dome();
        let locator = FaceLocator::new(&d);
        for f in 0..d.mesh().face_count() {
            assert_eq!(locator.locate(&d.mesh().face_direction(f)).0, f);
        }
    }
}
