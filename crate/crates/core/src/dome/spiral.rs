use std::f64::consts::TAU;

use nalgebra::{Point3, Unit, Vector3};

use super::mesh::TriMesh;
use super::Viewpoint;

/// Width of a θ ring. Face angles closer than this are treated as equal.
pub const RING_QUANTUM: f64 = 1e-6;

/// Orthonormal frame `(e1, e2)` spanning the plane normal to `up`, with
/// `e1` the projection of `+x` (or `+y` when `up` is parallel to `x`).
pub fn azimuth_frame(up: &Unit<Vector3<f64>>) -> (Vector3<f64>, Vector3<f64>) {
    let project = |v: Vector3<f64>| v - up.into_inner() * up.dot(&v);
    let mut e1 = project(Vector3::x());
    if e1.norm() < 1e-9 {
        e1 = project(Vector3::y());
    }
    let e1 = e1.normalize();
    let e2 = up.cross(&e1);
    (e1, e2)
}

/// Azimuth of `dir` in `[0, 2π)` measured from the reference meridian.
pub fn azimuth(dir: &Vector3<f64>, frame: &(Vector3<f64>, Vector3<f64>)) -> f64 {
    let a = dir.dot(&frame.1).atan2(dir.dot(&frame.0));
    let a = if a < 0.0 { a + TAU } else { a };
    if a > TAU - 1e-9 {
        0.0
    } else {
        a
    }
}

/// Polar angle between `dir` and `up`.
pub fn polar_angle(dir: &Vector3<f64>, up: &Unit<Vector3<f64>>) -> f64 {
    up.dot(dir).clamp(-1.0, 1.0).acos()
}

/// Orders the face centers of a hemisphere mesh from the pole outward:
/// by θ ring, then by azimuth from the reference meridian, then by face id.
/// Viewpoints are numbered from 1 and lie on the unit sphere around the
/// origin.
pub fn spiral_index(mesh: &TriMesh, up: &Unit<Vector3<f64>>) -> Vec<Viewpoint> {
    let frame = azimuth_frame(up);
    let mut keyed: Vec<(i64, f64, usize, Vector3<f64>, f64)> = (0..mesh.face_count())
        .map(|face| {
            let dir = mesh.face_direction(face);
            let theta = polar_angle(&dir, up);
            let ring = (theta / RING_QUANTUM).round() as i64;
            (ring, azimuth(&dir, &frame), face, dir, theta)
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    keyed
        .into_iter()
        .enumerate()
        .map(|(i, (_, _, face_id, direction, theta))| Viewpoint {
            index: i + 1,
            position: Point3::from(direction),
            direction,
            theta,
            face_id,
        })
        .collect()
}
