//! One decision per frame: rebuild the grid, count occluders per
//! viewpoint, and move to the argmax of the objective.

use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use crate::dome::Dome;
use crate::error::{Error, Result};
use crate::format::sig9;
use crate::grid::{build_frame_grid, voxelize, GridSpec, OccupancyGrid};
use crate::joints::{joint_distance, JointMap};
use crate::objective::{candidate_set, p_total, ObjectiveBreakdown, ObjectiveWeights, PlannerState};
use crate::occlusion::{project_to_dome, OcclusionVector};

/// Occlusion threshold used throughout the reference setup.
pub const DEFAULT_M0: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub weights: ObjectiveWeights,
    pub m0: u32,
    pub grid: GridSpec,
}

/// Merged world-frame cloud of one frame plus the sensor origins used for
/// carving.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameData {
    pub points: Vec<Point3<f64>>,
    pub sensors: Vec<Point3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub from_index: usize,
    pub to_index: usize,
    pub breakdown: ObjectiveBreakdown,
    /// Arc length between the two viewpoints (meters).
    pub geodesic_moved: f64,
    /// Euclidean joint-space distance (radians).
    pub joint_moved: f64,
    /// Polar angle of the chosen viewpoint (radians).
    pub angle_to: f64,
    /// Every candidate had at least `m0` occluders.
    pub all_occluded: bool,
    /// The chosen viewpoint itself has at least `m0` occluders.
    pub target_occluded: bool,
}

impl Decision {
    pub fn moved(&self) -> bool {
        self.from_index != self.to_index
    }
}

/// Decisions of a replay, one per frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub decisions: Vec<Decision>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// Viewpoint held after each frame.
    pub fn path(&self) -> Vec<usize> {
        self.decisions.iter().map(|d| d.to_index).collect()
    }

    pub fn jumps(&self) -> usize {
        self.decisions.iter().filter(|d| d.moved()).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "frame,from,to,geodesic_moved,joint_moved,angle_to,all_occluded,target_occluded"
        )?;
        for (k, d) in self.decisions.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                k + 1,
                d.from_index,
                d.to_index,
                sig9(d.geodesic_moved),
                sig9(d.joint_moved),
                sig9(d.angle_to),
                d.all_occluded as u8,
                d.target_occluded as u8,
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Writes a breakdown as `index,p_vis,p_nocc,p_dist,p_jt,p_total`.
pub fn write_breakdown_csv<W: Write>(b: &ObjectiveBreakdown, mut out: W) -> std::io::Result<()> {
    writeln!(out, "index,p_vis,p_nocc,p_dist,p_jt,p_total")?;
    for r in &b.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            sig9(r.p_vis),
            sig9(r.p_nocc),
            sig9(r.p_dist),
            sig9(r.p_jt),
            sig9(r.p_total)
        )?;
    }
    Ok(())
}

/// The dome, the arm's joint table and the objective settings.
#[derive(Debug, Clone)]
pub struct Planner<'a> {
    pub dome: &'a Dome,
    pub joints: &'a JointMap,
    pub config: PlannerConfig,
}

impl<'a> Planner<'a> {
    pub fn new(dome: &'a Dome, joints: &'a JointMap, config: PlannerConfig) -> Self {
        Planner {
            dome,
            joints,
            config,
        }
    }

    /// Occluder counts of one frame; the grid is rebuilt from scratch.
    /// Counts depend on seen cells only, so free space is not carved here.
    pub fn observe(&self, frame: &FrameData) -> OcclusionVector {
        project_to_dome(&voxelize(&frame.points, &self.config.grid), self.dome)
    }

    /// Fully labeled grid of one frame, free space carved from every
    /// sensor.
    pub fn frame_grid(&self, frame: &FrameData) -> OccupancyGrid {
        build_frame_grid(&frame.points, &frame.sensors, &self.config.grid)
    }

    /// Picks the next viewpoint for a state whose occlusion vector is
    /// already up to date.
    pub fn decide(&self, state: &PlannerState) -> Result<Decision> {
        let candidates = candidate_set(self.dome, self.joints, state.viewpoint_index);
        let breakdown = p_total(
            state,
            &candidates,
            &self.config.weights,
            self.config.m0,
            self.dome,
            self.joints,
        )?;
        let to = breakdown.argmax().index;
        let m0 = self.config.m0;
        let all_occluded = candidates.iter().all(|&i| state.occlusion.is_occluded(i, m0));
        let target = self.joints.config(to).ok_or(Error::UnreachableCandidate(to))?;
        Ok(Decision {
            from_index: state.viewpoint_index,
            to_index: to,
            geodesic_moved: self.dome.geodesic_distance(state.viewpoint_index, to)?,
            joint_moved: joint_distance(&state.joints, target),
            angle_to: self.dome.viewpoint(to)?.theta,
            all_occluded,
            target_occluded: state.occlusion.is_occluded(to, m0),
            breakdown,
        })
    }

    /// State at `index` with the given occlusion counts.
    pub fn state_at(&self, index: usize, occlusion: OcclusionVector) -> Result<PlannerState> {
        PlannerState::at(self.dome, self.joints, index, occlusion)
    }

    /// Observes a frame, decides, and returns the decision together with
    /// the state after the move.
    pub fn next_state(&self, state: &PlannerState, frame: &FrameData) -> Result<(Decision, PlannerState)> {
        let mut current = state.clone();
        current.occlusion = self.observe(frame);
        let decision = self.decide(&current)?;
        let next = self.state_at(decision.to_index, current.occlusion)?;
        Ok((decision, next))
    }

    /// Runs the planner over an ordered sequence of frames.
    pub fn replay<I>(&self, frames: I, start_index: usize) -> Result<Trajectory>
    where
        I: IntoIterator<Item = Result<FrameData>>,
    {
        let mut state = self.state_at(start_index, OcclusionVector::zeros(self.dome.len()))?;
        let mut trajectory = Trajectory::default();
        for frame in frames {
            let (decision, next) = self.next_state(&state, &frame?)?;
            trajectory.decisions.push(decision);
            state = next;
        }
        Ok(trajectory)
    }

    /// [`Planner::replay`] over precomputed occlusion vectors.
    pub fn replay_occlusion(&self, frames: &[OcclusionVector], start_index: usize) -> Result<Trajectory> {
        let mut trajectory = Trajectory::default();
        let mut index = start_index;
        for m in frames {
            let decision = self.decide(&self.state_at(index, m.clone())?)?;
            index = decision.to_index;
            trajectory.decisions.push(decision);
        }
        Ok(trajectory)
    }
}
