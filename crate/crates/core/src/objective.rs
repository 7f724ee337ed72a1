//! The four-term viewpoint objective.
//!
//! For a current state and a set of candidate viewpoints the objective is
//!
//! ```text
//! P_total = w_vis·P_vis + w_nocc·P_nocc + w_dist·P_dist + w_jt·P_jt
//! ```
//!
//! where `P_vis`, `P_dist` and `P_jt` are Gaussian-shaped scores
//! normalized to sum to one over the candidates, and `P_nocc` is a plain
//! 0/1 indicator of "fewer than `m0` occluding voxels".

use crate::dome::{angle_between, Dome, Viewpoint};
use crate::error::{Error, Result};
use crate::joints::{JointConfig, JointMap};
use crate::occlusion::OcclusionVector;

/// Mixture weights, non-negative and summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub vis: f64,
    pub nocc: f64,
    pub dist: f64,
    pub jt: f64,
}

impl ObjectiveWeights {
    /// Validates and rescales the weights to sum to one.
    pub fn new(vis: f64, nocc: f64, dist: f64, jt: f64) -> Result<Self> {
        let w = [vis, nocc, dist, jt];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "weights must be finite and non-negative, got {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        Ok(ObjectiveWeights {
            vis: vis / sum,
            nocc: nocc / sum,
            dist: dist / sum,
            jt: jt / sum,
        })
    }

    /// Weights of the reference workcell setup
    /// (`[w_nocc, w_vis, w_dist, w_jt] = [0.080, 0.238, 0.585, 0.096]`,
    /// rescaled to sum to one).
    pub fn reference() -> Self {
        ObjectiveWeights::new(0.238, 0.080, 0.585, 0.096).expect("valid constants")
    }

    /// `[vis, nocc, dist, jt]`.
    pub fn to_array(self) -> [f64; 4] {
        [self.vis, self.nocc, self.dist, self.jt]
    }

    pub fn from_array(w: [f64; 4]) -> Result<Self> {
        ObjectiveWeights::new(w[0], w[1], w[2], w[3])
    }
}

/// Current viewpoint, arm configuration and occlusion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    pub viewpoint_index: usize,
    pub direction: nalgebra::Vector3<f64>,
    pub joints: JointConfig,
    pub occlusion: OcclusionVector,
}

impl PlannerState {
    /// State at an allowed, reachable viewpoint.
    pub fn at(dome: &Dome, joints: &JointMap, index: usize, occlusion: OcclusionVector) -> Result<Self> {
        let vp = dome.viewpoint(index)?;
        let config = *joints.config(index).ok_or(Error::UnreachableCandidate(index))?;
        if occlusion.len() != dome.len() {
            return Err(Error::OcclusionLength {
                expected: dome.len(),
                found: occlusion.len(),
            });
        }
        Ok(PlannerState {
            viewpoint_index: index,
            direction: vp.direction,
            joints: config,
            occlusion,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub index: usize,
    pub p_vis: f64,
    pub p_nocc: f64,
    pub p_dist: f64,
    pub p_jt: f64,
    pub p_total: f64,
}

impl CandidateScore {
    /// `[p_vis, p_nocc, p_dist, p_jt]`, the order of
    /// [`ObjectiveWeights::to_array`].
    pub fn components(&self) -> [f64; 4] {
        [self.p_vis, self.p_nocc, self.p_dist, self.p_jt]
    }
}

/// Per-candidate component values, ordered by viewpoint index.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveBreakdown {
    pub current: usize,
    pub rows: Vec<CandidateScore>,
}

impl ObjectiveBreakdown {
    /// Best candidate; ties go to the lowest index.
    pub fn argmax(&self) -> &CandidateScore {
        let mut best = &self.rows[0];
        for row in &self.rows[1..] {
            if row.p_total > best.p_total {
                best = row;
            }
        }
        best
    }

    pub fn row(&self, index: usize) -> Option<&CandidateScore> {
        self.rows
            .binary_search_by_key(&index, |r| r.index)
            .ok()
            .map(|i| &self.rows[i])
    }

    /// Re-weights the stored components.
    pub fn reweighted(&self, weights: &ObjectiveWeights) -> ObjectiveBreakdown {
        let w = weights.to_array();
        ObjectiveBreakdown {
            current: self.current,
            rows: self
                .rows
                .iter()
                .map(|r| CandidateScore {
                    p_total: mix(&w, &r.components()),
                    ..*r
                })
                .collect(),
        }
    }
}

fn mix(w: &[f64; 4], p: &[f64; 4]) -> f64 {
    w[0] * p[0] + w[1] * p[1] + w[2] * p[2] + w[3] * p[3]
}

/// `exp(−½ (2θ/θ_lim)²)`.
pub fn vis_unnormalized(theta: f64, theta_lim: f64) -> f64 {
    let x = 2.0 * theta / theta_lim;
    (-0.5 * x * x).exp()
}

/// `exp(−½ (2·θ_move/θ_lim)²)` where `θ_move` is the angle travelled on
/// the dome; the same as `exp(−½ (d/f)²)` with `d = r·θ_move` and
/// `f = r·θ_lim/2`.
pub fn dist_unnormalized(move_angle: f64, theta_lim: f64) -> f64 {
    vis_unnormalized(move_angle, theta_lim)
}

/// `exp(−‖Δj‖² / (2σ²))`.
pub fn jt_unnormalized(distance_sq: f64, sigma_sq: f64) -> f64 {
    (-0.5 * distance_sq / sigma_sq).exp()
}

/// Normalizes `exp(exponents)` to sum to one, shifting by the maximum so
/// that far-off candidates cannot underflow the sum to zero.
fn softmax(exponents: &[f64]) -> Vec<f64> {
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

fn check_theta_lim(theta_lim: f64) -> Result<()> {
    if theta_lim > 0.0 && theta_lim.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidThetaLimit(theta_lim))
    }
}

/// Viewing-angle preference, normalized over the candidates.
pub fn p_vis(candidates: &[&Viewpoint], theta_lim: f64) -> Result<Vec<f64>> {
    check_theta_lim(theta_lim)?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let exponents: Vec<f64> = candidates
        .iter()
        .map(|vp| {
            let x = 2.0 * vp.theta / theta_lim;
            -0.5 * x * x
        })
        .collect();
    Ok(softmax(&exponents))
}

/// Occlusion indicator: 1 when a candidate has fewer than `m0` occluding
/// voxels. Not normalized.
pub fn p_nocc(counts: &[u32], m0: u32) -> Vec<f64> {
    counts
        .iter()
        .map(|&m| if m < m0 { 1.0 } else { 0.0 })
        .collect()
}

/// Travel-distance preference relative to `current`, normalized over the
/// candidates.
pub fn p_dist(current: &Viewpoint, candidates: &[&Viewpoint], theta_lim: f64) -> Result<Vec<f64>> {
    check_theta_lim(theta_lim)?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let exponents: Vec<f64> = candidates
        .iter()
        .map(|vp| {
            let x = 2.0 * angle_between(&current.direction, &vp.direction) / theta_lim;
            -0.5 * x * x
        })
        .collect();
    Ok(softmax(&exponents))
}

/// Joint-travel preference relative to `current`, normalized over the
/// candidates. Every candidate must be reachable.
pub fn p_jt(current: &JointConfig, candidates: &[usize], joints: &JointMap) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let sigma_sq = joints.sigma_sq();
    let exponents = candidates
        .iter()
        .map(|&i| {
            let config = joints.config(i).ok_or(Error::UnreachableCandidate(i))?;
            Ok(-0.5 * current.distance_squared(config) / sigma_sq)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(softmax(&exponents))
}

/// Allowed and reachable viewpoints, ascending, always including
/// `current`.
pub fn candidate_set(dome: &Dome, joints: &JointMap, current: usize) -> Vec<usize> {
    (1..=dome.len())
        .filter(|&i| i == current || joints.is_reachable(i))
        .collect()
}

/// Evaluates every component and the weighted objective for each
/// candidate.
pub fn p_total(
    state: &PlannerState,
    candidates: &[usize],
    weights: &ObjectiveWeights,
    m0: u32,
    dome: &Dome,
    joints: &JointMap,
) -> Result<ObjectiveBreakdown> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    if state.occlusion.len() != dome.len() {
        return Err(Error::OcclusionLength {
            expected: dome.len(),
            found: state.occlusion.len(),
        });
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let vps = sorted
        .iter()
        .map(|&i| dome.viewpoint(i))
        .collect::<Result<Vec<&Viewpoint>>>()?;
    let current = dome.viewpoint(state.viewpoint_index)?;
    let theta_lim = dome.theta_lim();

    let vis = p_vis(&vps, theta_lim)?;
    let counts: Vec<u32> = sorted.iter().map(|&i| state.occlusion.count(i)).collect();
    let nocc = p_nocc(&counts, m0);
    let dist = p_dist(current, &vps, theta_lim)?;
    let jt = p_jt(&state.joints, &sorted, joints)?;

    let w = weights.to_array();
    let rows = sorted
        .iter()
        .enumerate()
        .map(|(k, &index)| {
            let p = [vis[k], nocc[k], dist[k], jt[k]];
            CandidateScore {
                index,
                p_vis: p[0],
                p_nocc: p[1],
                p_dist: p[2],
                p_jt: p[3],
                p_total: mix(&w, &p),
            }
        })
        .collect();
    Ok(ObjectiveBreakdown {
        current: state.viewpoint_index,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dome::DomeConfig;
    use crate::joints::synth_joint_table;

    fn setup() -> (Dome, JointMap) {
        let dome = Dome::build(&DomeConfig::default()).unwrap();
        let joints = synth_joint_table(&dome, &[6, 7, 8]).unwrap();
        (dome, joints)
    }

    #[test]
    fn closed_form_values() {
        let lim = 0.7;
        assert_eq!(vis_unnormalized(0.0, lim), 1.0);
        assert!((vis_unnormalized(lim, lim) - (-2.0f64).exp()).abs() < 1e-12);
        assert!((vis_unnormalized(lim, lim) - 0.13534).abs() < 1e-5);
        assert!((vis_unnormalized(lim / 2.0, lim) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((vis_unnormalized(lim / 2.0, lim) - 0.60653).abs() < 1e-5);
        assert!((jt_unnormalized(2.0 * 0.3, 0.3) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(jt_unnormalized(0.0, 0.3), 1.0);
    }

    #[test]
    fn nocc_is_strict() {
        assert_eq!(p_nocc(&[0, 3, 2, 7], 3), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn bad_theta_lim() {
        let (dome, _) = setup();
        let vps: Vec<_> = dome.viewpoints().iter().collect();
        assert!(p_vis(&vps, 0.0).is_err());
        assert!(p_vis(&vps, -1.0).is_err());
    }

    #[test]
    fn unreachable_candidate_rejected() {
        let (_, joints) = setup();
        let current = joints.config(1).unwrap();
        assert!(matches!(
            p_jt(current, &[1, 2, 7], &joints),
            Err(Error::UnreachableCandidate(7))
        ));
    }

    #[test]
    fn dist_peaks_at_current() {
        let (dome, _) = setup();
        let vps: Vec<_> = dome.viewpoints().iter().collect();
        for cur in dome.viewpoints() {
            let p = p_dist(cur, &vps, dome.theta_lim()).unwrap();
            let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            assert_eq!(best + 1, cur.index);
        }
    }

    #[test]
    fn joint_scaling_invariance() {
        let (dome, joints) = setup();
        let scaled = crate::joints::JointMap::new(
            joints
                .entries()
                .iter()
                .map(|(&i, c)| (i, c.map(|c| JointConfig(c.0.map(|a| 3.0 * a)))))
                .collect(),
        )
        .unwrap();
        assert!((scaled.sigma_sq() / joints.sigma_sq() - 9.0).abs() < 1e-9);
        let cands = candidate_set(&dome, &joints, 1);
        let a = p_jt(joints.config(10).unwrap(), &cands, &joints).unwrap();
        let b = p_jt(scaled.config(10).unwrap(), &cands, &scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_weights() {
        let (dome, joints) = setup();
        let mut counts = vec![0u32; 44];
        counts[4] = 5;
        counts[20] = 3;
        let state = PlannerState::at(&dome, &joints, 12, OcclusionVector::new(counts)).unwrap();
        let cands = candidate_set(&dome, &joints, 12);
        assert_eq!(cands.len(), 41);
        let nocc_only = ObjectiveWeights::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let b = p_total(&state, &cands, &nocc_only, 3, &dome, &joints).unwrap();
        assert!(b.rows.iter().all(|r| r.p_total == r.p_nocc));
        let dist_only = ObjectiveWeights::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let b = p_total(&state, &cands, &dist_only, 3, &dome, &joints).unwrap();
        assert_eq!(b.argmax().index, 12);
    }

    #[test]
    fn weights_validation() {
        assert!(ObjectiveWeights::new(-0.1, 0.5, 0.5, 0.1).is_err());
        assert!(ObjectiveWeights::new(0.0, 0.0, 0.0, 0.0).is_err());
        let w = ObjectiveWeights::reference();
        assert!((w.to_array().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w.vis < w.dist);
    }

    #[test]
    fn occlusion_length_checked() {
        let (dome, joints) = setup();
        assert!(PlannerState::at(&dome, &joints, 1, OcclusionVector::zeros(10)).is_err());
        assert!(PlannerState::at(&dome, &joints, 7, OcclusionVector::zeros(44)).is_err());
    }
}
