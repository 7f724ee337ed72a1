//! Fitting the objective weights to a prescribed score.
//!
//! Every (current viewpoint, candidate) pair of every training frame gives
//! one row: the four component values of the objective and the target
//!
//! ```text
//! P̃ = α_s·Ω + α_d·e^(−d) + α_θ·e^(−θ)
//! ```
//!
//! with `Ω` the candidate's "unoccluded" flag, `d` the geodesic move in
//! meters and `θ` the candidate's polar angle. The weights minimize the
//! squared error over the probability simplex.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::dome::Dome;
use crate::error::{Error, Result};
use crate::joints::JointMap;
use crate::objective::{candidate_set, p_total, ObjectiveWeights, PlannerState};
use crate::occlusion::OcclusionVector;
use crate::planner::{Planner, PlannerConfig};

/// Values each alpha takes in the exploration grid.
pub const ALPHA_VALUES: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringWeights {
    pub alpha_s: f64,
    pub alpha_d: f64,
    pub alpha_theta: f64,
}

impl ScoringWeights {
    pub fn new(alpha_s: f64, alpha_d: f64, alpha_theta: f64) -> Result<Self> {
        let a = [alpha_s, alpha_d, alpha_theta];
        if a.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidWeights(format!("alphas must be positive, got {a:?}")));
        }
        Ok(ScoringWeights {
            alpha_s,
            alpha_d,
            alpha_theta,
        })
    }

    /// `[0.5, 1, 2]`, the setting picked in the reference exploration.
    pub fn reference() -> Self {
        ScoringWeights {
            alpha_s: 0.5,
            alpha_d: 1.0,
            alpha_theta: 2.0,
        }
    }
}

/// All 64 alpha triples, `alpha_s` varying slowest.
pub fn alpha_grid() -> Vec<ScoringWeights> {
    itertools::iproduct!(ALPHA_VALUES, ALPHA_VALUES, ALPHA_VALUES)
        .map(|(s, d, t)| ScoringWeights {
            alpha_s: s,
            alpha_d: d,
            alpha_theta: t,
        })
        .collect()
}

/// Prescribed score of moving to a candidate `distance` meters away with
/// polar angle `theta`.
pub fn score_tilde(unoccluded: bool, distance: f64, theta: f64, alphas: &ScoringWeights) -> f64 {
    let omega = if unoccluded { 1.0 } else { 0.0 };
    alphas.alpha_s * omega + alphas.alpha_d * (-distance).exp() + alphas.alpha_theta * (-theta).exp()
}

/// How targets are scaled before fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TargetScaling {
    /// Scores used as they are.
    #[default]
    Raw,
    /// Targets of one state are divided by their sum over the state's
    /// candidates, putting them on the scale of the normalized components.
    PerState,
}

/// Which viewpoint's polar angle enters the `α_θ·e^(−θ)` term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ScoreAngle {
    /// The candidate's angle.
    #[default]
    Candidate,
    /// The current viewpoint's angle.
    Current,
}

/// How the prescribed score is turned into fitting targets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TargetOptions {
    pub scaling: TargetScaling,
    pub angle: ScoreAngle,
}

/// One (current, candidate) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    /// `[p_vis, p_nocc, p_dist, p_jt]`.
    pub components: [f64; 4],
    pub unoccluded: bool,
    pub distance: f64,
    pub theta: f64,
    pub current_theta: f64,
    /// Index of the state this pair belongs to within its [`TrainingSet`].
    pub state: usize,
}

/// Occlusion vectors of one scenario's key frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingScenario {
    pub name: String,
    pub frames: Vec<OcclusionVector>,
}

/// Training pairs of one or more scenarios.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub rows: Vec<PairRow>,
    pub states: usize,
}

impl TrainingSet {
    /// Pairs over every frame and every reachable allowed current
    /// viewpoint of a scenario, occluded current states included.
    pub fn from_scenario(scenario: &TrainingScenario, dome: &Dome, joints: &JointMap, m0: u32) -> Result<Self> {
        // components do not depend on the weights
        let weights = ObjectiveWeights::reference();
        let mut set = TrainingSet::default();
        for m in &scenario.frames {
            for current in joints.reachable().filter(|&i| i <= dome.len()) {
                let state = PlannerState::at(dome, joints, current, m.clone())?;
                let state_theta = dome.viewpoint(current)?.theta;
                let candidates = candidate_set(dome, joints, current);
                let b = p_total(&state, &candidates, &weights, m0, dome, joints)?;
                for r in &b.rows {
                    set.rows.push(PairRow {
                        components: r.components(),
                        unoccluded: !m.is_occluded(r.index, m0),
                        distance: dome.geodesic_distance(current, r.index)?,
                        theta: dome.viewpoint(r.index)?.theta,
                        current_theta: state_theta,
                        state: set.states,
                    });
                }
                set.states += 1;
            }
        }
        Ok(set)
    }

    pub fn from_scenarios(scenarios: &[TrainingScenario], dome: &Dome, joints: &JointMap, m0: u32) -> Result<Self> {
        let sets = scenarios
            .iter()
            .map(|s| TrainingSet::from_scenario(s, dome, joints, m0))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingSet::concat(sets.iter()))
    }

    /// Joins sets, renumbering states.
    pub fn concat<'a>(sets: impl IntoIterator<Item = &'a TrainingSet>) -> TrainingSet {
        let mut out = TrainingSet::default();
        for s in sets {
            let offset = out.states;
            out.rows.extend(s.rows.iter().map(|r| PairRow {
                state: r.state + offset,
                ..*r
            }));
            out.states += s.states;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Target value of every row.
    pub fn targets(&self, alphas: &ScoringWeights, opts: TargetOptions) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .rows
            .iter()
            .map(|r| {
                let theta = match opts.angle {
                    ScoreAngle::Candidate => r.theta,
                    ScoreAngle::Current => r.current_theta,
                };
                score_tilde(r.unoccluded, r.distance, theta, alphas)
            })
            .collect();
        if opts.scaling == TargetScaling::PerState {
            let mut sums = vec![0.0; self.states];
            for (r, v) in self.rows.iter().zip(&t) {
                sums[r.state] += v;
            }
            for (r, v) in self.rows.iter().zip(t.iter_mut()) {
                *v /= sums[r.state];
            }
        }
        t
    }

    /// `(component rows, targets)` ready for [`fit_weights`].
    pub fn design(&self, alphas: &ScoringWeights, opts: TargetOptions) -> (Vec<[f64; 4]>, Vec<f64>) {
        (
            self.rows.iter().map(|r| r.components).collect(),
            self.targets(alphas, opts),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub weights: ObjectiveWeights,
    pub train_residual: f64,
    /// Residual on held-out pairs; `None` when nothing was held out.
    pub test_residual: Option<f64>,
}

/// Sum of squared errors of `weights` on the given pairs.
pub fn residual(weights: &ObjectiveWeights, rows: &[[f64; 4]], targets: &[f64]) -> f64 {
    let w = weights.to_array();
    rows.iter()
        .zip(targets)
        .map(|(p, t)| {
            let e = w[0] * p[0] + w[1] * p[1] + w[2] * p[2] + w[3] * p[3] - t;
            e * e
        })
        .sum()
}

/// Least squares over the simplex `w ≥ 0, Σw = 1`.
///
/// The objective is a convex quadratic in four variables, so the optimum
/// is the equality-constrained optimum of one of the 15 faces of the
/// simplex. Every face is solved in closed form and the best feasible one
/// kept.
pub fn fit_weights(rows: &[[f64; 4]], targets: &[f64]) -> Result<FitResult> {
    if rows.len() < 4 {
        return Err(Error::TooFewPairs {
            needed: 4,
            found: rows.len(),
        });
    }
    if rows.len() != targets.len() {
        return Err(Error::InvalidWeights(format!(
            "{} rows but {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let mut g = Matrix4::<f64>::zeros();
    let mut c = Vector4::<f64>::zeros();
    for (p, &t) in rows.iter().zip(targets) {
        let p = Vector4::from(*p);
        g += p * p.transpose();
        c += p * t;
    }
    // unique on the simplex iff G is definite on directions with Σ = 0
    let ones = Matrix4::from_element(1.0);
    let scale = g.trace().max(1.0);
    let shifted = (g + ones * scale) / scale;
    let min_eig = shifted.symmetric_eigenvalues().min();
    if min_eig <= 1e-12 {
        return Err(Error::NonIdentifiable);
    }

    let mut best: Option<(f64, [f64; 4])> = None;
    for mask in 1u32..16 {
        let support: Vec<usize> = (0..4).filter(|k| mask & (1 << k) != 0).collect();
        let n = support.len();
        let mut kkt = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                kkt[(a, b)] = g[(i, j)];
            }
            kkt[(a, n)] = 1.0;
            kkt[(n, a)] = 1.0;
            rhs[a] = c[i];
        }
        rhs[n] = 1.0;
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        if (0..n).any(|a| sol[a] < -1e-12) {
            continue;
        }
        let mut w = [0.0; 4];
        for (a, &i) in support.iter().enumerate() {
            w[i] = sol[a].max(0.0);
        }
        let weights = ObjectiveWeights::from_array(w)?;
        let r = residual(&weights, rows, targets);
        if best.is_none_or(|(b, _)| r < b) {
            best = Some((r, weights.to_array()));
        }
    }
    // the vertices are always feasible, so some face succeeded
    let (train_residual, w) = best.ok_or(Error::NonIdentifiable)?;
    Ok(FitResult {
        weights: ObjectiveWeights::from_array(w)?,
        train_residual,
        test_residual: None,
    })
}

/// Fits weights on a training set for one alpha setting.
pub fn fit_set(set: &TrainingSet, alphas: &ScoringWeights, opts: TargetOptions) -> Result<FitResult> {
    let (rows, targets) = set.design(alphas, opts);
    fit_weights(&rows, &targets)
}

/// Behavior of the planner under one set of weights.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BehaviorMetrics {
    pub jump_count: usize,
    /// Mean geodesic move over the decisions that moved (meters).
    pub avg_distance: f64,
    /// Mean height gain along the dome normal over the decisions that
    /// moved (meters).
    pub avg_z_increase: f64,
}

/// Replays every scenario from every reachable allowed start.
pub fn behavior(
    scenarios: &[TrainingScenario],
    dome: &Dome,
    joints: &JointMap,
    config: &PlannerConfig,
) -> Result<BehaviorMetrics> {
    let planner = Planner::new(dome, joints, config.clone());
    let height = |i: usize| -> Result<f64> {
        let vp = dome.viewpoint(i)?;
        Ok((vp.position - dome.center()).dot(dome.up()))
    };
    let mut jumps = 0;
    let mut dist = 0.0;
    let mut rise = 0.0;
    for s in scenarios {
        for start in joints.reachable().filter(|&i| i <= dome.len()) {
            let t = planner.replay_occlusion(&s.frames, start)?;
            for d in t.decisions.iter().filter(|d| d.moved()) {
                jumps += 1;
                dist += d.geodesic_moved;
                rise += height(d.to_index)? - height(d.from_index)?;
            }
        }
    }
    let n = jumps.max(1) as f64;
    Ok(BehaviorMetrics {
        jump_count: jumps,
        avg_distance: dist / n,
        avg_z_increase: rise / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRow {
    pub alphas: ScoringWeights,
    pub fit: FitResult,
    pub metrics: BehaviorMetrics,
}

/// Fits and replays every alpha triple of [`alpha_grid`].
pub fn explore_alphas(
    scenarios: &[TrainingScenario],
    dome: &Dome,
    joints: &JointMap,
    config: &PlannerConfig,
    opts: TargetOptions,
) -> Result<Vec<AlphaRow>> {
    let set = TrainingSet::from_scenarios(scenarios, dome, joints, config.m0)?;
    alpha_grid()
        .into_iter()
        .map(|alphas| {
            let fit = fit_set(&set, &alphas, opts)?;
            let cfg = PlannerConfig {
                weights: fit.weights,
                ..config.clone()
            };
            let metrics = behavior(scenarios, dome, joints, &cfg)?;
            Ok(AlphaRow { alphas, fit, metrics })
        })
        .collect()
}

/// One train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    /// Scenario positions used for training, ascending.
    pub train: Vec<usize>,
    pub fit: FitResult,
    pub train_pairs: usize,
    pub test_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub splits: Vec<SplitResult>,
}

impl CrossValidation {
    /// `(mean, min, max)` of the test residuals.
    pub fn test_stats(&self) -> (f64, f64, f64) {
        let v: Vec<f64> = self.splits.iter().filter_map(|s| s.fit.test_residual).collect();
        let (min, max) = v.iter().copied().minmax().into_option().unwrap_or((0.0, 0.0));
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        (mean, min, max)
    }

    /// `(mean, min, max)` of the training residuals.
    pub fn train_stats(&self) -> (f64, f64, f64) {
        let v: Vec<f64> = self.splits.iter().map(|s| s.fit.train_residual).collect();
        let (min, max) = v.iter().copied().minmax().into_option().unwrap_or((0.0, 0.0));
        (v.iter().sum::<f64>() / v.len().max(1) as f64, min, max)
    }
}

/// Number of training scenarios for a split fraction.
pub fn train_count(scenarios: usize, fraction: f64) -> usize {
    ((scenarios as f64 * fraction).round() as usize).clamp(1, scenarios.saturating_sub(1).max(1))
}

/// Fits on every choice of `train_count` scenarios and scores the rest.
pub fn cross_validate(
    sets: &[TrainingSet],
    fraction: f64,
    alphas: &ScoringWeights,
    opts: TargetOptions,
) -> Result<CrossValidation> {
    if sets.len() < 2 {
        return Err(Error::TooFewPairs {
            needed: 2,
            found: sets.len(),
        });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidWeights(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let k = train_count(sets.len(), fraction);
    let splits = (0..sets.len())
        .combinations(k)
        .map(|train| {
            let test: Vec<usize> = (0..sets.len()).filter(|i| !train.contains(i)).collect();
            let train_set = TrainingSet::concat(train.iter().map(|&i| &sets[i]));
            let test_set = TrainingSet::concat(test.iter().map(|&i| &sets[i]));
            let mut fit = fit_set(&train_set, alphas, opts)?;
            let (rows, targets) = test_set.design(alphas, opts);
            fit.test_residual = Some(residual(&fit.weights, &rows, &targets));
            Ok(SplitResult {
                train,
                fit,
                train_pairs: train_set.len(),
                test_pairs: test_set.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossValidation { splits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_64_distinct_rows() {
        let g = alpha_grid();
        assert_eq!(g.len(), 64);
        for [a, b] in g.iter().array_combinations() {
            assert_ne!(a, b);
        }
    }

    #[test]
    fn score_examples() {
        let a = ScoringWeights::new(0.7, 1.1, 1.3).unwrap();
        assert!((score_tilde(true, 0.0, 0.0, &a) - 3.1).abs() < 1e-12);
        assert!((score_tilde(false, 0.0, 0.0, &a) - 2.4).abs() < 1e-12);
        let v = score_tilde(true, 0.30, 0.44, &ScoringWeights::reference());
        assert!((v - 2.528891063).abs() < 1e-9, "{v}");
    }

    #[test]
    fn too_few_pairs() {
        let rows = [[1.0, 0.0, 0.0, 0.0]; 3];
        assert!(matches!(
            fit_weights(&rows, &[1.0; 3]),
            Err(Error::TooFewPairs { needed: 4, found: 3 })
        ));
    }

    #[test]
    fn identical_components_are_not_identifiable() {
        let rows: Vec<[f64; 4]> = (0..10).map(|k| [k as f64; 4]).collect();
        let t: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert!(matches!(fit_weights(&rows, &t), Err(Error::NonIdentifiable)));
    }

    #[test]
    fn vertex_solution() {
        // target equals component 2 exactly
        let rows: Vec<[f64; 4]> = (0..20)
            .map(|k| {
                let x = k as f64;
                [x.sin(), (0.3 * x).cos(), x * 0.1, (x * 0.7).sin().abs()]
            })
            .collect();
        let t: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let fit = fit_weights(&rows, &t).unwrap();
        assert!((fit.weights.dist - 1.0).abs() < 1e-9);
        assert!(fit.train_residual < 1e-18);
    }

    #[test]
    fn split_counts() {
        assert_eq!(train_count(8, 0.5), 4);
        assert_eq!(train_count(2, 0.5), 1);
        assert_eq!((0..8).combinations(4).count(), 70);
    }
}
