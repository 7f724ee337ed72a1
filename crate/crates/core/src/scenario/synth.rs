//! Synthetic scenes: occluder blobs hovering over a table, seen by four
//! corner sensors.
//!
//! A blob is a cone around a direction from the dome center. Every dome
//! face whose center lies within the blob's angular radius receives
//! `density` occupied voxels stacked along the face direction, each chosen
//! so that its center projects back onto that face.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};

use crate::dome::{angle_between, azimuth_frame, Dome, DomeConfig};
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::grid::GridSpec;
use crate::joints::synth_joint_table;
use crate::occlusion::{dome_direction, FaceLocator};
use crate::planner::DEFAULT_M0;

use super::manifest::Manifest;
use super::{default_grid, write_poses, write_ply};

/// Sensor positions at the corners above the table.
pub const SYNTH_SENSORS: [[f64; 3]; 4] = [
    [0.7, 0.7, 0.75],
    [-0.7, 0.7, 0.75],
    [-0.7, -0.7, 0.75],
    [0.7, -0.7, 0.75],
];

/// Occluder cone: center direction by polar angle and azimuth (radians,
/// in the dome's azimuth frame), angular radius, and voxels per face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub polar: f64,
    pub azimuth: f64,
    pub radius: f64,
    pub density: u32,
}

impl Blob {
    pub fn direction(&self, dome: &Dome) -> Vector3<f64> {
        let (e1, e2) = azimuth_frame(dome.up());
        let (s, c) = self.polar.sin_cos();
        dome.up().into_inner() * c + (e1 * self.azimuth.cos() + e2 * self.azimuth.sin()) * s
    }
}

/// Mesh faces covered by a blob: those whose center direction is within
/// the blob's angular radius.
pub fn blob_footprint(blob: &Blob, dome: &Dome) -> Vec<usize> {
    let center = blob.direction(dome);
    (0..dome.mesh().face_count())
        .filter(|&f| angle_between(&dome.mesh().face_direction(f), &center) <= blob.radius)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScript {
    pub name: String,
    /// Blobs of each key frame.
    pub frames: Vec<Vec<Blob>>,
    /// Viewpoints the synthetic arm cannot reach.
    pub unreachable: Vec<usize>,
    pub table: bool,
    pub m0: u32,
    pub dome: DomeConfig,
    pub grid: GridSpec,
}

impl SynthScript {
    /// Reads a script: `name`, `m0`, `table = true|false`,
    /// `unreachable = i j ..`, and one `frame` line per key frame holding
    /// `;`-separated blobs `polar azimuth radius density`.
    pub fn load(path: &Path) -> Result<Self> {
        let m = Manifest::load(path)?;
        m.check_keys(&["name", "frame", "unreachable", "table", "m0"])?;
        let mut frames = Vec::new();
        for e in m.all("frame") {
            let mut blobs = Vec::new();
            for part in e.value.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let words: Vec<&str> = part.split_whitespace().collect();
                let bad = || m.error("frame", Some(e.line), format!("blob `{part}` is not `polar azimuth radius density`"));
                if words.len() != 4 {
                    return Err(bad());
                }
                let num = |k: usize| words[k].parse::<f64>().ok().filter(|x| x.is_finite());
                let (Some(polar), Some(azimuth), Some(radius), Ok(density)) =
                    (num(0), num(1), num(2), words[3].parse::<u32>())
                else {
                    return Err(bad());
                };
                blobs.push(Blob {
                    polar,
                    azimuth,
                    radius,
                    density,
                });
            }
            frames.push(blobs);
        }
        if frames.is_empty() {
            return Err(m.error("frame", None, "missing required key"));
        }
        let unreachable = match m.get("unreachable")? {
            Some(e) => e
                .value
                .split_whitespace()
                .map(|w| {
                    w.parse()
                        .map_err(|_| m.error("unreachable", Some(e.line), format!("bad index `{w}`")))
                })
                .collect::<Result<Vec<usize>>>()?,
            None => Vec::new(),
        };
        Ok(SynthScript {
            name: match m.get("name")? {
                Some(e) => e.value.clone(),
                None => path.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
            },
            frames,
            unreachable,
            table: m.value("table")?.unwrap_or(true),
            m0: m.value("m0")?.unwrap_or(DEFAULT_M0),
            dome: DomeConfig::default(),
            grid: default_grid(),
        })
    }

    /// Script with the given key frames and the default workcell.
    pub fn new(name: &str, frames: Vec<Vec<Blob>>) -> Self {
        SynthScript {
            name: name.to_string(),
            frames,
            unreachable: vec![41, 43, 44],
            table: true,
            m0: DEFAULT_M0,
            dome: DomeConfig::default(),
            grid: default_grid(),
        }
    }
}

/// Five key frames: one blob over the top, the blob moved to the left,
/// a second blob on the right, both moved up, and both merged over the
/// pole.
pub fn two_hands_script() -> SynthScript {
    use std::f64::consts::PI;
    let blob = |polar, azimuth, radius| Blob {
        polar,
        azimuth,
        radius,
        density: 4,
    };
    SynthScript::new(
        "two_hands",
        vec![
            vec![blob(0.0, 0.0, 0.3)],
            vec![blob(0.5, PI, 0.35)],
            vec![blob(0.5, PI, 0.35), blob(0.5, 0.0, 0.35)],
            vec![blob(0.3, PI, 0.3), blob(0.3, 0.0, 0.3)],
            vec![blob(0.0, 0.0, 0.45)],
        ],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub manifest: PathBuf,
    /// Per key frame, the mesh faces each blob was meant to cover.
    pub footprints: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

/// Writes a scenario for `script` into `dir`: one PLY per sensor per
/// frame, the poses, a joint table and the manifest.
pub fn generate_synthetic(script: &SynthScript, dir: &Path) -> Result<SynthOutput> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dome = Dome::build(&script.dome)?;
    let grid = &script.grid;
    let locator = FaceLocator::new(&dome);
    let mut warnings = Vec::new();

    let poses: Vec<Isometry3<f64>> = SYNTH_SENSORS
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let yaw = std::f64::consts::FRAC_PI_4 * (2 * k + 1) as f64 + std::f64::consts::PI;
            Isometry3::from_parts(
                Translation3::new(p[0], p[1], p[2]),
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            )
        })
        .collect();
    write_poses(&dir.join("poses.txt"), &poses)?;

    let table = if script.table { table_sheet(&dome, grid, &mut warnings) } else { Vec::new() };

    let mut frame_lines = Vec::new();
    let mut footprints = Vec::new();
    for (k, blobs) in script.frames.iter().enumerate() {
        let mut used = HashSet::new();
        let mut points = table.clone();
        let mut covered = Vec::new();
        for (b, blob) in blobs.iter().enumerate() {
            if blob.density < script.m0 {
                warnings.push(format!(
                    "frame {} blob {}: density {} is below m0 = {}; its faces will not register as occluded",
                    k + 1,
                    b + 1,
                    blob.density,
                    script.m0
                ));
            }
            for face in blob_footprint(blob, &dome) {
                let placed = place_face_voxels(&dome, grid, &locator, face, blob.density, &mut used);
                if placed.len() < blob.density as usize {
                    warnings.push(format!(
                        "frame {}: face {face} holds only {} of {} voxels",
                        k + 1,
                        placed.len(),
                        blob.density
                    ));
                }
                points.extend(placed);
                covered.push(face);
            }
        }
        covered.sort_unstable();
        covered.dedup();
        footprints.push(covered);

        let mut names = Vec::new();
        for (s, pose) in poses.iter().enumerate() {
            let local: Vec<Point3<f64>> = points
                .iter()
                .skip(s)
                .step_by(poses.len())
                .map(|p| pose.inverse_transform_point(p))
                .collect();
            let name = format!("frame{:02}_s{}.ply", k + 1, s + 1);
            write_ply(&dir.join(&name), &local)?;
            names.push(name);
        }
        frame_lines.push(names.join(" "));
    }

    let joints = synth_joint_table(&dome, &script.unreachable)?;
    joints.write_csv(&dir.join("joints.csv"))?;

    let g = grid;
    let mut text = format!(
        "name = {}\ngrid.origin = {} {} {}\ngrid.extents = {} {} {}\ngrid.resolution = {} {} {}\n\
         dome.subdiv = {}\ndome.radius = {}\ndome.align = {}\nm0 = {}\nsensors = poses.txt\njoints = joints.csv\n",
        script.name,
        sig9(g.origin.x),
        sig9(g.origin.y),
        sig9(g.origin.z),
        sig9(g.extents.x),
        sig9(g.extents.y),
        sig9(g.extents.z),
        g.resolution[0],
        g.resolution[1],
        g.resolution[2],
        script.dome.subdivisions,
        sig9(script.dome.radius),
        script.dome.alignment,
        script.m0,
    );
    text.push_str(&match script.dome.theta_lim {
        crate::dome::ThetaLimit::Angle(a) => format!("dome.theta_lim = {}\n", sig9(a)),
        crate::dome::ThetaLimit::ViewpointCount(n) => format!("dome.viewpoints = {n}\n"),
    });
    for line in &frame_lines {
        text.push_str(&format!("frames = {line}\n"));
    }
    let manifest = dir.join("scenario.txt");
    std::fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
    Ok(SynthOutput {
        manifest,
        footprints,
        warnings,
    })
}

/// Up to `count` fresh voxel centers along a face direction whose own
/// projection lands on that face.
fn place_face_voxels(
    dome: &Dome,
    grid: &GridSpec,
    locator: &FaceLocator,
    face: usize,
    count: u32,
    used: &mut HashSet<[usize; 3]>,
) -> Vec<Point3<f64>> {
    let dir = dome.mesh().face_direction(face);
    let step = grid.cell_size().min();
    let mut out = Vec::new();
    let mut r = 0.2 * dome.radius() / 0.7;
    while out.len() < count as usize && r < 0.9 * dome.radius() {
        let p = dome.center() + dir * r;
        r += step;
        let Some(cell) = grid.cell_of(&p) else { continue };
        let c = grid.cell_center(cell);
        let Some(d) = dome_direction(dome, &c) else { continue };
        if locator.locate(&d).0 == face && used.insert(cell) {
            out.push(c);
        }
    }
    out
}

/// One point per voxel column of the table plane `z = 0`.
fn table_sheet(dome: &Dome, grid: &GridSpec, warnings: &mut Vec<String>) -> Vec<Point3<f64>> {
    let z = 0.0;
    let cs = grid.cell_size();
    let mut out = Vec::new();
    let mut inside = 0;
    for i in 0..grid.resolution[0] {
        for j in 0..grid.resolution[1] {
            let x = grid.origin.x + (i as f64 + 0.5) * cs.x;
            let y = grid.origin.y + (j as f64 + 0.5) * cs.y;
            let p = Point3::new(x, y, z);
            let Some(cell) = grid.cell_of(&p) else { continue };
            if dome_direction(dome, &grid.cell_center(cell)).is_some() {
                inside += 1;
            }
            out.push(p);
        }
    }
    if inside > 0 {
        warnings.push(format!("{inside} table voxels lie inside the dome and count as occluders"));
    }
    out
}
