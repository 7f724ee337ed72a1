//! Ground-truth comparison and dome occlusion export.

use std::io::Write;
use std::path::Path;

use crate::dome::Dome;
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::joints::joint_distance;
use crate::objective::ObjectiveWeights;
use crate::occlusion::OcclusionVector;
use crate::planner::{Decision, Planner};

use super::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MismatchReason {
    /// The expected viewpoint cannot be reached by the arm.
    JointLimit,
    /// The expected viewpoint needs more than twice the joint travel of
    /// the chosen one.
    JointFlip,
    Other,
}

impl std::fmt::Display for MismatchReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MismatchReason::JointLimit => "joint-limit",
            MismatchReason::JointFlip => "joint-flip",
            MismatchReason::Other => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub scenario: String,
    pub initial: usize,
    pub expected: usize,
    pub decision: Decision,
    /// `None` when the planner matched the ground truth.
    pub reason: Option<MismatchReason>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub cases: Vec<CaseResult>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.cases.len()
    }

    pub fn matches(&self) -> usize {
        self.cases.iter().filter(|c| c.reason.is_none()).count()
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| c.reason.is_some())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "scenario,initial,expected,chosen,match,reason,geodesic_moved,joint_moved")?;
        for c in &self.cases {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.scenario,
                c.initial,
                c.expected,
                c.decision.to_index,
                c.reason.is_none() as u8,
                c.reason.map(|r| r.to_string()).unwrap_or_default(),
                sig9(c.decision.geodesic_moved),
                sig9(c.decision.joint_moved),
            )?;
        }
        Ok(())
    }
}

/// Runs one decision from every reachable initial viewpoint that has a
/// ground-truth entry, on the first frame of each scenario.
pub fn evaluate(scenarios: &[Scenario], weights: &ObjectiveWeights) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for s in scenarios {
        if s.gt.is_empty() {
            continue;
        }
        let dome = s.build_dome()?;
        let joints = s.load_joints()?;
        let planner = Planner::new(&dome, &joints, s.planner_config(*weights));
        let m = planner.observe(&s.load_frame(0)?);
        for (&initial, &expected) in &s.gt {
            if !joints.is_reachable(initial) {
                continue;
            }
            let decision = planner.decide(&planner.state_at(initial, m.clone())?)?;
            let reason = (decision.to_index != expected).then(|| {
                match (joints.config(initial), joints.config(expected), joints.config(decision.to_index)) {
                    (_, None, _) => MismatchReason::JointLimit,
                    (Some(from), Some(gt), Some(chosen))
                        if joint_distance(from, gt) > 2.0 * joint_distance(from, chosen) =>
                    {
                        MismatchReason::JointFlip
                    }
                    _ => MismatchReason::Other,
                }
            });
            report.cases.push(CaseResult {
                scenario: s.name.clone(),
                initial,
                expected,
                decision,
                reason,
            });
        }
    }
    Ok(report)
}

/// Writes the dome mesh (all hemisphere faces, in meters) as ASCII OBJ.
pub fn write_dome_obj(dome: &Dome, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let mesh = dome.mesh();
    writeln!(out, "# dome radius {} with {} faces", sig9(dome.radius()), mesh.face_count()).map_err(io)?;
    for v in mesh.vertices() {
        let p = dome.center() + v * dome.radius();
        writeln!(out, "v {} {} {}", sig9(p.x), sig9(p.y), sig9(p.z)).map_err(io)?;
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes the dome as OBJ at `path` plus a sidecar CSV (same stem,
/// `.csv`) with `index,face,count,occluded` per allowed viewpoint. OBJ
/// face numbers are `face + 1`.
pub fn export_dome_occlusion(m: &OcclusionVector, dome: &Dome, m0: u32, path: &Path) -> Result<()> {
    if m.len() != dome.len() {
        return Err(Error::OcclusionLength {
            expected: dome.len(),
            found: m.len(),
        });
    }
    write_dome_obj(dome, path)?;
    let csv_path = path.with_extension("csv");
    let io = |e| Error::io(&csv_path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(&csv_path).map_err(io)?);
    writeln!(out, "index,face,count,occluded").map_err(io)?;
    for vp in dome.viewpoints() {
        writeln!(
            out,
            "{},{},{},{}",
            vp.index,
            vp.face_id,
            m.count(vp.index),
            m.is_occluded(vp.index, m0) as u8
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
