//! Scenario files: manifests, point-cloud frames, sensor poses, ground
//! truth, and the synthetic generator and evaluation harness built on
//! them.
//!
//! A scenario manifest is a flat `key = value` file:
//!
//! ```text
//! name = desk
//! sensors = poses.txt
//! frames = f1_s1.ply f1_s2.ply
//! frames = f2_s1.ply f2_s2.ply
//! joints = joints.csv
//! gt = gt.csv
//! ```
//!
//! | key | default |
//! |-----|---------|
//! | `name` | file stem of the manifest |
//! | `root` | directory of the manifest; other paths are relative to it |
//! | `grid.origin` | `-0.75 -0.75 -0.035` |
//! | `grid.extents` | `1.5 1.5 0.8` |
//! | `grid.resolution` | extents / `grid.voxel` |
//! | `grid.voxel` | `0.02` |
//! | `dome.subdiv` | `2` |
//! | `dome.radius` | `0.7` |
//! | `dome.theta_lim` | unset; an explicit limit in radians |
//! | `dome.viewpoints` | `44` when `dome.theta_lim` is unset |
//! | `dome.align` | `edge` (`vertex` puts a vertex at the pole) |
//! | `dome.height` | `0` |
//! | `target` | `0 0 0` |
//! | `m0` | `3` |
//! | `sensors` | required; 16 numbers (row-major 4×4) per sensor |
//! | `frames` | required, repeated; one PLY path per sensor |
//! | `joints` | required; `index,j1,..,j6,reachable` CSV |
//! | `gt` | none; `initial,expected` CSV |
//! | `permutation` | none; `dataset,index` CSV renumbering `gt` and `joints` |
//! | `weights` | none; a weights file |

mod eval;
mod manifest;
mod ply;
mod synth;

pub use eval::{evaluate, export_dome_occlusion, write_dome_obj, CaseResult, EvalReport, MismatchReason};
pub use manifest::{Entry, Manifest};
pub use ply::{read_ply, write_ply};
pub use synth::{
    blob_footprint, two_hands_script, generate_synthetic, Blob, SynthOutput, SynthScript, SYNTH_SENSORS,
};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Matrix3, Matrix4, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};

use crate::dome::{Dome, DomeConfig, PoleAlignment, ThetaLimit};
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::grid::{voxelize, GridSpec};
use crate::joints::{csv_error, load_joint_table, JointMap};
use crate::objective::ObjectiveWeights;
use crate::occlusion::{project_to_dome, OcclusionVector};
use crate::planner::{FrameData, PlannerConfig, DEFAULT_M0};
use crate::training::TrainingScenario;

const SCENARIO_KEYS: &[&str] = &[
    "name",
    "root",
    "grid.origin",
    "grid.extents",
    "grid.resolution",
    "grid.voxel",
    "dome.subdiv",
    "dome.radius",
    "dome.theta_lim",
    "dome.viewpoints",
    "dome.align",
    "dome.height",
    "target",
    "m0",
    "sensors",
    "frames",
    "joints",
    "gt",
    "permutation",
    "weights",
];

/// Default workcell volume: a 1.5 m square table area, 0.8 m tall.
pub fn default_grid() -> GridSpec {
    GridSpec::with_voxel_size(Point3::new(-0.75, -0.75, -0.035), Vector3::new(1.5, 1.5, 0.8), 0.02)
        .expect("valid constants")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub manifest: PathBuf,
    pub grid: GridSpec,
    pub dome: DomeConfig,
    pub m0: u32,
    /// Sensor-to-world transform of each sensor.
    pub poses: Vec<Isometry3<f64>>,
    /// Per frame, one PLY path per sensor.
    pub frames: Vec<Vec<PathBuf>>,
    pub joints: PathBuf,
    /// Initial viewpoint → expected next viewpoint, in dome indices.
    pub gt: BTreeMap<usize, usize>,
    /// Dataset index → dome index.
    pub permutation: Option<BTreeMap<usize, usize>>,
    pub weights: Option<ObjectiveWeights>,
}

/// Reads and validates a scenario manifest.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let m = Manifest::load(path)?;
    m.check_keys(SCENARIO_KEYS)?;
    let root = match m.get("root")? {
        Some(e) => m.dir().join(&e.value),
        None => m.dir(),
    };
    let name = match m.get("name")? {
        Some(e) => e.value.clone(),
        None => path.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
    };

    let grid = grid_from(&m)?;
    let dome = dome_from(&m)?;
    let m0 = m.value::<u32>("m0")?.unwrap_or(DEFAULT_M0);
    if m0 == 0 {
        return Err(m.error("m0", m.get("m0")?.map(|e| e.line), "m0 must be at least 1"));
    }

    let sensors = m.require("sensors")?;
    let poses = read_poses(&m.existing_path(sensors, &root)?)?;
    if poses.is_empty() {
        return Err(m.error("sensors", Some(sensors.line), "pose file lists no sensors"));
    }

    let frame_entries = m.all("frames");
    if frame_entries.is_empty() {
        return Err(m.error("frames", None, "missing required key"));
    }
    let mut frames = Vec::new();
    for e in frame_entries {
        let paths: Vec<PathBuf> = e.value.split_whitespace().map(|p| root.join(p)).collect();
        if paths.len() != poses.len() {
            return Err(m.error(
                "frames",
                Some(e.line),
                format!("{} clouds for {} sensors", paths.len(), poses.len()),
            ));
        }
        if let Some(p) = paths.iter().find(|p| !p.exists()) {
            return Err(m.error("frames", Some(e.line), format!("file not found: {}", p.display())));
        }
        frames.push(paths);
    }

    let joints = m.existing_path(m.require("joints")?, &root)?;
    let permutation = match m.get("permutation")? {
        Some(e) => Some(read_index_pairs(&m.existing_path(e, &root)?, ["dataset", "index"])?),
        None => None,
    };
    let built = Dome::build(&dome).map_err(|err| m.error("dome", None, err.to_string()))?;
    let mut gt = BTreeMap::new();
    if let Some(e) = m.get("gt")? {
        let raw = read_index_pairs(&m.existing_path(e, &root)?, ["initial", "expected"])?;
        for (a, b) in raw {
            let (a, b) = match &permutation {
                Some(p) => (remap(p, a, &m, e)?, remap(p, b, &m, e)?),
                None => (a, b),
            };
            if let Some(bad) = [a, b].into_iter().find(|&i| i == 0 || i > built.len()) {
                return Err(m.error(
                    "gt",
                    Some(e.line),
                    format!("viewpoint {bad} outside the {} allowed viewpoints", built.len()),
                ));
            }
            gt.insert(a, b);
        }
    }
    let weights = match m.get("weights")? {
        Some(e) => Some(read_weights(&m.existing_path(e, &root)?)?),
        None => None,
    };

    Ok(Scenario {
        name,
        manifest: path.to_path_buf(),
        grid,
        dome,
        m0,
        poses,
        frames,
        joints,
        gt,
        permutation,
        weights,
    })
}

fn remap(p: &BTreeMap<usize, usize>, i: usize, m: &Manifest, e: &Entry) -> Result<usize> {
    p.get(&i)
        .copied()
        .ok_or_else(|| m.error(&e.key, Some(e.line), format!("index {i} missing from the permutation")))
}

fn grid_from(m: &Manifest) -> Result<GridSpec> {
    let d = default_grid();
    let origin = match m.get("grid.origin")? {
        Some(e) => Point3::from(m.numbers::<3>(e)?),
        None => d.origin,
    };
    let extents = match m.get("grid.extents")? {
        Some(e) => Vector3::from(m.numbers::<3>(e)?),
        None => d.extents,
    };
    let res_entry = m.get("grid.resolution")?;
    let voxel_entry = m.get("grid.voxel")?;
    let spec = match (res_entry, voxel_entry) {
        (Some(_), Some(v)) => {
            return Err(m.error("grid.voxel", Some(v.line), "give grid.resolution or grid.voxel, not both"))
        }
        (Some(e), None) => {
            let r = m.numbers::<3>(e)?;
            if r.iter().any(|x| x.fract() != 0.0 || *x < 1.0) {
                return Err(m.error(&e.key, Some(e.line), "resolution must be positive integers"));
            }
            GridSpec::new(origin, extents, r.map(|x| x as usize))
        }
        (None, Some(e)) => GridSpec::with_voxel_size(origin, extents, m.parse_value(e)?),
        (None, None) => GridSpec::with_voxel_size(origin, extents, 0.02),
    };
    spec.map_err(|err| m.error("grid", None, err.to_string()))
}

/// Dome settings of any manifest; keys other than `dome.*` and `target`
/// are ignored.
pub fn load_dome_config(path: &Path) -> Result<DomeConfig> {
    dome_from(&Manifest::load(path)?)
}

fn dome_from(m: &Manifest) -> Result<DomeConfig> {
    let mut c = DomeConfig::default();
    if let Some(s) = m.value("dome.subdiv")? {
        c.subdivisions = s;
    }
    if let Some(r) = m.value::<f64>("dome.radius")? {
        if !(r > 0.0 && r.is_finite()) {
            return Err(m.error("dome.radius", m.get("dome.radius")?.map(|e| e.line), "radius must be positive"));
        }
        c.radius = r;
    }
    if let Some(h) = m.value("dome.height")? {
        c.height = h;
    }
    if let Some(a) = m.value::<PoleAlignment>("dome.align")? {
        c.alignment = a;
    }
    if let Some(e) = m.get("target")? {
        c.target = Point3::from(m.numbers::<3>(e)?);
    }
    match (m.value::<f64>("dome.theta_lim")?, m.value::<usize>("dome.viewpoints")?) {
        (Some(_), Some(_)) => {
            return Err(m.error(
                "dome.viewpoints",
                m.get("dome.viewpoints")?.map(|e| e.line),
                "give dome.theta_lim or dome.viewpoints, not both",
            ))
        }
        (Some(a), None) => c.theta_lim = ThetaLimit::Angle(a),
        (None, Some(n)) => c.theta_lim = ThetaLimit::ViewpointCount(n),
        (None, None) => {}
    }
    Ok(c)
}

impl Scenario {
    pub fn build_dome(&self) -> Result<Dome> {
        Dome::build(&self.dome)
    }

    /// Joint table in dome indices.
    pub fn load_joints(&self) -> Result<JointMap> {
        let table = load_joint_table(&self.joints)?;
        let Some(p) = &self.permutation else {
            return Ok(table);
        };
        let mut out = BTreeMap::new();
        for (&i, c) in table.entries() {
            let j = p.get(&i).copied().ok_or_else(|| {
                Error::parse(&self.joints, 0, format!("index {i} missing from the permutation"))
            })?;
            out.insert(j, *c);
        }
        JointMap::new(out)
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Merged world-frame cloud of frame `k` (0-based).
    pub fn load_frame(&self, k: usize) -> Result<FrameData> {
        let wrap = |e: Error| Error::Frame {
            frame: k + 1,
            source: Box::new(e),
        };
        let paths = self.frames.get(k).ok_or_else(|| {
            wrap(Error::InvalidGrid(format!("scenario has {} frames", self.frames.len())))
        })?;
        let mut frame = FrameData::default();
        for (path, pose) in paths.iter().zip(&self.poses) {
            let cloud = read_ply(path).map_err(wrap)?;
            frame.points.extend(cloud.iter().map(|p| pose * p));
            frame.sensors.push(pose.translation.vector.into());
        }
        Ok(frame)
    }

    /// Frames in order, loaded lazily.
    pub fn frames(&self) -> impl Iterator<Item = Result<FrameData>> + '_ {
        (0..self.frames.len()).map(|k| self.load_frame(k))
    }

    /// Occluder counts of every frame.
    pub fn occlusion_frames(&self, dome: &Dome) -> Result<Vec<OcclusionVector>> {
        self.frames()
            .map(|f| {
                let f = f?;
                Ok(project_to_dome(&voxelize(&f.points, &self.grid), dome))
            })
            .collect()
    }

    pub fn training_scenario(&self, dome: &Dome) -> Result<TrainingScenario> {
        Ok(TrainingScenario {
            name: self.name.clone(),
            frames: self.occlusion_frames(dome)?,
        })
    }

    pub fn planner_config(&self, weights: ObjectiveWeights) -> PlannerConfig {
        PlannerConfig {
            weights,
            m0: self.m0,
            grid: self.grid.clone(),
        }
    }
}

/// Reads sensor poses: whitespace-separated numbers, 16 per sensor, each
/// block a row-major homogeneous sensor-to-world matrix.
pub fn read_poses(path: &Path) -> Result<Vec<Isometry3<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default();
        for w in line.split_whitespace() {
            let v: f64 = w
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(path, n + 1, format!("malformed number `{w}`")))?;
            values.push((v, n + 1));
        }
    }
    if values.len() % 16 != 0 {
        return Err(Error::parse(
            path,
            values.last().map_or(1, |v| v.1),
            format!("{} numbers is not a multiple of 16", values.len()),
        ));
    }
    values
        .chunks(16)
        .map(|block| {
            let line = block[0].1;
            let m = Matrix4::from_row_iterator(block.iter().map(|v| v.0));
            pose_from_matrix(&m).map_err(|msg| Error::parse(path, line, msg))
        })
        .collect()
}

fn pose_from_matrix(m: &Matrix4<f64>) -> std::result::Result<Isometry3<f64>, String> {
    let bottom = m.row(3);
    if (bottom - nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0)).amax() > 1e-9 {
        return Err("last row of a pose must be 0 0 0 1".into());
    }
    let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    if (r.transpose() * r - Matrix3::identity()).amax() > 1e-6 || r.determinant() < 0.0 {
        return Err("pose rotation is not orthonormal".into());
    }
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let t = Translation3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
    Ok(Isometry3::from_parts(t, rot))
}

pub fn write_poses(path: &Path, poses: &[Isometry3<f64>]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for (k, pose) in poses.iter().enumerate() {
        writeln!(out, "# sensor {}", k + 1).map_err(io)?;
        let m = pose.to_homogeneous();
        for row in m.row_iter() {
            let cols: Vec<String> = row.iter().map(|v| sig9(*v)).collect();
            writeln!(out, "{}", cols.join(" ")).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Two-column integer CSV with the given header.
pub fn read_index_pairs(path: &Path, header: [&str; 2]) -> Result<BTreeMap<usize, usize>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::parse(path, 1, format!("expected header `{}`", header.join(","))));
    }
    let mut map = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| -> Result<usize> {
            let v = record.get(k).unwrap_or_default();
            v.parse()
                .map_err(|_| Error::parse(path, line, format!("bad index `{v}`")))
        };
        if map.insert(field(0)?, field(1)?).is_some() {
            return Err(Error::parse(path, line, "duplicate key"));
        }
    }
    Ok(map)
}

pub fn write_index_pairs(path: &Path, header: [&str; 2], pairs: &BTreeMap<usize, usize>) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{},{}", header[0], header[1]).map_err(io)?;
    for (a, b) in pairs {
        writeln!(out, "{a},{b}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads `w_vis`, `w_nocc`, `w_dist`, `w_jt` from a `key = value` file.
pub fn read_weights(path: &Path) -> Result<ObjectiveWeights> {
    let m = Manifest::load(path)?;
    m.check_keys(&["w_vis", "w_nocc", "w_dist", "w_jt"])?;
    let get = |k: &str| -> Result<f64> { m.parse_value(m.require(k)?) };
    ObjectiveWeights::new(get("w_vis")?, get("w_nocc")?, get("w_dist")?, get("w_jt")?)
        .map_err(|e| m.error("w_*", None, e.to_string()))
}

pub fn write_weights(path: &Path, w: &ObjectiveWeights) -> Result<()> {
    let text = format!(
        "w_vis = {}\nw_nocc = {}\nw_dist = {}\nw_jt = {}\n",
        sig9(w.vis),
        sig9(w.nocc),
        sig9(w.dist),
        sig9(w.jt)
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

const SET_KEYS: &[&str] = &["scenario", "alphas", "split", "scaling", "score_angle", "weights"];

/// A list of scenarios plus training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub alphas: crate::training::ScoringWeights,
    pub split: f64,
    pub targets: crate::training::TargetOptions,
    pub weights: Option<ObjectiveWeights>,
}

/// Reads a scenario-set manifest: repeated `scenario = path` keys plus
/// optional `alphas` (default `0.5 1 2`), `split` (`0.5`), `scaling`
/// (`per-state` or `raw`), `score_angle` (`candidate` or `current`) and
/// `weights`.
pub fn load_scenario_set(path: &Path) -> Result<ScenarioSet> {
    use crate::training::{ScoreAngle, ScoringWeights, TargetOptions, TargetScaling};
    let m = Manifest::load(path)?;
    m.check_keys(SET_KEYS)?;
    let entries = m.all("scenario");
    if entries.is_empty() {
        return Err(m.error("scenario", None, "missing required key"));
    }
    let scenarios = entries
        .iter()
        .map(|e| load_scenario(&m.existing_path(e, &m.dir())?))
        .collect::<Result<Vec<_>>>()?;
    if let Some(s) = scenarios.iter().find(|s| s.dome != scenarios[0].dome) {
        return Err(m.error("scenario", None, format!("scenario `{}` uses a different dome", s.name)));
    }
    let alphas = match m.get("alphas")? {
        Some(e) => {
            let [s, d, t] = m.numbers::<3>(e)?;
            ScoringWeights::new(s, d, t).map_err(|err| m.error("alphas", Some(e.line), err.to_string()))?
        }
        None => ScoringWeights::reference(),
    };
    let split = m.value::<f64>("split")?.unwrap_or(0.5);
    let scaling = match m.get("scaling")? {
        None => TargetScaling::default(),
        Some(e) => match e.value.as_str() {
            "per-state" => TargetScaling::PerState,
            "raw" => TargetScaling::Raw,
            other => return Err(m.error("scaling", Some(e.line), format!("unknown scaling `{other}`"))),
        },
    };
    let angle = match m.get("score_angle")? {
        None => ScoreAngle::default(),
        Some(e) => match e.value.as_str() {
            "candidate" => ScoreAngle::Candidate,
            "current" => ScoreAngle::Current,
            other => return Err(m.error("score_angle", Some(e.line), format!("unknown angle `{other}`"))),
        },
    };
    let weights = match m.get("weights")? {
        Some(e) => Some(read_weights(&m.existing_path(e, &m.dir())?)?),
        None => None,
    };
    Ok(ScenarioSet {
        scenarios,
        alphas,
        split,
        targets: TargetOptions { scaling, angle },
        weights,
    })
}
