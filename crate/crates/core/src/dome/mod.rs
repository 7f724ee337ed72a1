//! The view dome: a tessellated hemisphere over the target whose face
//! centers are the candidate camera positions.
//!
//! Construction runs in four steps:
//!
//! 1. an icosahedron on the unit sphere ([`build_icosahedron_aligned`]),
//! 2. midpoint subdivision ([`subdivide`]),
//! 3. the upper-hemisphere cut ([`restrict_hemisphere`]),
//! 4. a pole-to-equator ordering of the face centers ([`spiral_index`]),
//!    after which viewpoints steeper than `theta_lim` are dropped
//!    ([`allowed_viewpoints`]).
//!
//! ```
//! use dnbv::dome::{Dome, DomeConfig};
//!
//! let dome = Dome::build(&DomeConfig::default()).unwrap();
//! assert_eq!(dome.hemisphere_viewpoints().len(), 152);
//! assert_eq!(dome.viewpoints().len(), 44);
//! ```

mod mesh;
mod spiral;

pub use mesh::{
    build_icosahedron, build_icosahedron_aligned, pole_rotation, restrict_hemisphere, subdivide,
    PoleAlignment, TriMesh, MAX_SUBDIVISION,
};
pub use spiral::{azimuth, azimuth_frame, polar_angle, spiral_index, RING_QUANTUM};

use nalgebra::{Point3, Unit, Vector3};

use crate::error::{Error, Result};

/// Slack used when comparing a face angle against `theta_lim`.
const THETA_EPS: f64 = 1e-9;

/// A candidate camera position at a face center.
#[derive(Debug, Clone, PartialEq)]
pub struct Viewpoint {
    /// 1-based spiral index.
    pub index: usize,
    /// Point on the dome surface (meters).
    pub position: Point3<f64>,
    /// Unit vector from the dome center toward `position`.
    pub direction: Vector3<f64>,
    /// Angle between `direction` and the dome normal (radians).
    pub theta: f64,
    /// Index into the dome mesh faces.
    pub face_id: usize,
}

/// How the angular limit of the allowed viewpoints is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaLimit {
    /// An explicit limit in radians.
    Angle(f64),
    /// The smallest ring cut holding exactly this many viewpoints; the
    /// limit is the angle of its outermost ring.
    ViewpointCount(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomeConfig {
    pub subdivisions: u32,
    /// Dome radius (meters).
    pub radius: f64,
    /// The observed target point.
    pub target: Point3<f64>,
    /// Offset of the dome center above the target along `up` (meters).
    pub height: f64,
    /// Workcell normal.
    pub up: Vector3<f64>,
    pub alignment: PoleAlignment,
    pub theta_lim: ThetaLimit,
}

impl Default for DomeConfig {
    /// The 44-viewpoint, 0.7 m dome of the reference workcell.
    fn default() -> Self {
        DomeConfig {
            subdivisions: 2,
            radius: 0.7,
            target: Point3::origin(),
            height: 0.0,
            up: Vector3::z(),
            alignment: PoleAlignment::Edge,
            theta_lim: ThetaLimit::ViewpointCount(44),
        }
    }
}

/// The constrained view hemisphere. Immutable once built.
#[derive(Debug, Clone)]
pub struct Dome {
    mesh: TriMesh,
    radius: f64,
    center: Point3<f64>,
    up: Unit<Vector3<f64>>,
    theta_lim: f64,
    subdivision_level: u32,
    hemisphere: Vec<Viewpoint>,
    viewpoints: Vec<Viewpoint>,
    face_to_viewpoint: Vec<Option<usize>>,
}

impl Dome {
    pub fn build(config: &DomeConfig) -> Result<Dome> {
        if !(config.radius > 0.0 && config.radius.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "dome radius must be positive, got {}",
                config.radius
            )));
        }
        let up = Unit::try_new(config.up, 1e-12)
            .ok_or_else(|| Error::InvalidGrid("dome normal must be non-zero".into()))?;
        let sphere = subdivide(&build_icosahedron_aligned(config.alignment), config.subdivisions)?
            .rotated(&pole_rotation(&up));
        let mesh = restrict_hemisphere(&sphere, &up);
        let center = config.target + up.into_inner() * config.height;

        let mut hemisphere = spiral_index(&mesh, &up);
        for vp in &mut hemisphere {
            vp.position = center + vp.direction * config.radius;
        }
        let theta_lim = match config.theta_lim {
            ThetaLimit::Angle(t) => t,
            ThetaLimit::ViewpointCount(n) => theta_for_count(&hemisphere, n)?,
        };
        let viewpoints = allowed_viewpoints(&hemisphere, theta_lim)?;
        let mut face_to_viewpoint = vec![None; mesh.face_count()];
        for vp in &viewpoints {
            face_to_viewpoint[vp.face_id] = Some(vp.index);
        }
        Ok(Dome {
            mesh,
            radius: config.radius,
            center,
            up,
            theta_lim,
            subdivision_level: config.subdivisions,
            hemisphere,
            viewpoints,
            face_to_viewpoint,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> Point3<f64> {
        self.center
    }

    pub fn up(&self) -> &Unit<Vector3<f64>> {
        &self.up
    }

    pub fn theta_lim(&self) -> f64 {
        self.theta_lim
    }

    pub fn subdivision_level(&self) -> u32 {
        self.subdivision_level
    }

    /// Every face center of the hemisphere in spiral order.
    pub fn hemisphere_viewpoints(&self) -> &[Viewpoint] {
        &self.hemisphere
    }

    /// The allowed viewpoints, indexed `1..=K` in spiral order.
    pub fn viewpoints(&self) -> &[Viewpoint] {
        &self.viewpoints
    }

    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    /// Allowed viewpoint by 1-based index.
    pub fn viewpoint(&self, index: usize) -> Result<&Viewpoint> {
        index
            .checked_sub(1)
            .and_then(|i| self.viewpoints.get(i))
            .ok_or(Error::UnknownViewpoint(index))
    }

    /// Allowed viewpoint index of a mesh face, if the face is allowed.
    pub fn viewpoint_of_face(&self, face: usize) -> Option<usize> {
        self.face_to_viewpoint.get(face).copied().flatten()
    }

    /// Arc length on the dome between two allowed viewpoints (meters).
    pub fn geodesic_distance(&self, i: usize, j: usize) -> Result<f64> {
        let a = self.viewpoint(i)?;
        let b = self.viewpoint(j)?;
        Ok(self.radius * angle_between(&a.direction, &b.direction))
    }
}

/// Angle between two unit vectors, robust to rounding past ±1.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Viewpoints with `θ ≤ theta_lim`, renumbered `1..=K` in spiral order.
pub fn allowed_viewpoints(viewpoints: &[Viewpoint], theta_lim: f64) -> Result<Vec<Viewpoint>> {
    if !(theta_lim > 0.0 && theta_lim.is_finite()) {
        return Err(Error::InvalidThetaLimit(theta_lim));
    }
    let allowed: Vec<Viewpoint> = viewpoints
        .iter()
        .filter(|vp| vp.theta <= theta_lim + THETA_EPS)
        .enumerate()
        .map(|(i, vp)| Viewpoint {
            index: i + 1,
            ..vp.clone()
        })
        .collect();
    if allowed.is_empty() {
        return Err(Error::NoAllowedViewpoints(theta_lim));
    }
    Ok(allowed)
}

/// Cumulative viewpoint counts per θ ring, paired with the ring's largest
/// angle. Input must be in spiral order.
pub fn ring_cuts(viewpoints: &[Viewpoint]) -> Vec<(f64, usize)> {
    let mut cuts: Vec<(f64, usize)> = Vec::new();
    let mut last_ring = None;
    for (i, vp) in viewpoints.iter().enumerate() {
        let ring = (vp.theta / RING_QUANTUM).round() as i64;
        if last_ring == Some(ring) {
            let cut = cuts.last_mut().expect("ring started");
            cut.0 = cut.0.max(vp.theta);
            cut.1 = i + 1;
        } else {
            cuts.push((vp.theta, i + 1));
            last_ring = Some(ring);
        }
    }
    cuts
}

/// Sweeps θ over the ring angles and returns the limit at which exactly
/// `count` viewpoints are allowed.
pub fn theta_for_count(viewpoints: &[Viewpoint], count: usize) -> Result<f64> {
    let cuts = ring_cuts(viewpoints);
    if let Some(&(theta, _)) = cuts.iter().find(|c| c.1 == count) {
        return Ok(theta);
    }
    let below = cuts.iter().rev().find(|c| c.1 < count).map_or(0, |c| c.1);
    let above = cuts.iter().find(|c| c.1 > count).map_or(viewpoints.len(), |c| c.1);
    Err(Error::ViewpointCountUnreachable {
        requested: count,
        below,
        above,
    })
}
