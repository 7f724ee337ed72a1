//! `dnbv`: dome construction, occlusion projection, scoring, planning,
//! replay, training and evaluation from the command line.
//!
//! Every subcommand takes `--config <manifest>`. Exit status is 0 on
//! success, 1 when the input is invalid and 2 when a run fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dnbv::dome::Dome;
use dnbv::format::sig9;
use dnbv::joints::synth_joint_table;
use dnbv::objective::{candidate_set, p_total, ObjectiveWeights};
use dnbv::planner::{write_breakdown_csv, Planner};
use dnbv::scenario::{
    evaluate, export_dome_occlusion, generate_synthetic, load_dome_config, load_scenario, load_scenario_set,
    read_weights, write_dome_obj, write_weights, Scenario, ScenarioSet, SynthScript,
};
use dnbv::training::{cross_validate, explore_alphas, fit_set, TrainingSet};
use dnbv::{Error, Result};

#[derive(Parser)]
#[command(name = "dnbv", version, about = "Dynamic next-best-view planning on a view dome")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dome geometry.
    Dome {
        #[command(subcommand)]
        action: DomeAction,
    },
    /// Occluder counts of one frame, written as OBJ plus a CSV sidecar.
    Project {
        #[arg(long)]
        config: PathBuf,
        /// 1-based frame number.
        #[arg(long, default_value_t = 1)]
        frame: usize,
        /// OBJ path; the CSV goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Objective breakdown for one frame and current viewpoint.
    Score {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        frame: usize,
        #[arg(long)]
        current: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Planner decisions.
    Plan {
        #[command(subcommand)]
        action: PlanAction,
    },
    /// Trajectory over all frames of a scenario.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        start: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fits weights on a scenario set, explores the alpha grid and
    /// cross-validates.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for weights.txt, behavior.csv and cv.csv.
        #[arg(long)]
        out: PathBuf,
        /// Skip the 64-row alpha exploration.
        #[arg(long)]
        no_explore: bool,
    },
    /// Compares planner decisions with ground truth.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes a synthetic scenario from an occluder script.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Joint tables.
    Jointtable {
        #[command(subcommand)]
        action: JointAction,
    },
}

#[derive(Subcommand)]
enum DomeAction {
    /// Writes dome.obj and viewpoints.csv.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PlanAction {
    /// One decision, printed as `key = value` lines.
    Step {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        frame: usize,
        #[arg(long)]
        current: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Also write the breakdown CSV here.
        #[arg(long)]
        breakdown: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum JointAction {
    /// Smooth synthetic joint table for the manifest's dome.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated viewpoint indices the arm cannot reach.
        #[arg(long, value_delimiter = ',')]
        unreachable: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Dome {
            action: DomeAction::Build { config, out },
        } => dome_build(&config, &out),
        Command::Project { config, frame, out } => project(&config, frame, &out),
        Command::Score {
            config,
            frame,
            current,
            weights,
            out,
        } => score(&config, frame, current, weights.as_deref(), out.as_deref()),
        Command::Plan {
            action:
                PlanAction::Step {
                    config,
                    frame,
                    current,
                    weights,
                    breakdown,
                },
        } => plan_step(&config, frame, current, weights.as_deref(), breakdown.as_deref()),
        Command::Replay {
            config,
            start,
            weights,
            out,
        } => replay(&config, start, weights.as_deref(), out.as_deref()),
        Command::Train {
            config,
            out,
            no_explore,
        } => train(&config, &out, !no_explore),
        Command::Eval { config, weights, out } => eval(&config, weights.as_deref(), out.as_deref()),
        Command::Synth { config, out } => synth(&config, &out),
        Command::Jointtable {
            action: JointAction::Synth {
                config,
                out,
                unreachable,
            },
        } => jointtable_synth(&config, &out, &unreachable),
    }
}

/// Writes to `path`, or stdout when `None`.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `--weights`, then the manifest's `weights`, then the reference weights.
fn resolve_weights(flag: Option<&Path>, manifest: Option<ObjectiveWeights>) -> Result<ObjectiveWeights> {
    match flag {
        Some(p) => read_weights(p),
        None => Ok(manifest.unwrap_or_else(ObjectiveWeights::reference)),
    }
}

fn frame_index(s: &Scenario, frame: usize) -> Result<usize> {
    if frame == 0 || frame > s.frame_count() {
        return Err(Error::Manifest {
            path: s.manifest.clone(),
            key: "frames".into(),
            line: None,
            msg: format!("frame {frame} requested, scenario has {}", s.frame_count()),
        });
    }
    Ok(frame - 1)
}

fn dome_build(config: &Path, out: &Path) -> Result<()> {
    let dome = Dome::build(&load_dome_config(config)?)?;
    create_dir(out)?;
    write_dome_obj(&dome, &out.join("dome.obj"))?;
    let frame = dnbv::dome::azimuth_frame(dome.up());
    with_output(Some(&out.join("viewpoints.csv")), |w| {
        writeln!(w, "index,face,x,y,z,theta,azimuth")?;
        for vp in dome.viewpoints() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                vp.index,
                vp.face_id,
                sig9(vp.position.x),
                sig9(vp.position.y),
                sig9(vp.position.z),
                sig9(vp.theta),
                sig9(dnbv::dome::azimuth(&vp.direction, &frame))
            )?;
        }
        Ok(())
    })?;
    println!(
        "hemisphere faces = {}\nallowed viewpoints = {}\ntheta_lim = {}",
        dome.hemisphere_viewpoints().len(),
        dome.len(),
        sig9(dome.theta_lim())
    );
    Ok(())
}

fn project(config: &Path, frame: usize, out: &Path) -> Result<()> {
    let s = load_scenario(config)?;
    let k = frame_index(&s, frame)?;
    let dome = s.build_dome()?;
    let f = s.load_frame(k)?;
    let grid = dnbv::grid::build_frame_grid(&f.points, &f.sensors, &s.grid);
    let m = dnbv::occlusion::project_to_dome(&grid, &dome);
    export_dome_occlusion(&m, &dome, s.m0, out)?;
    let occluded = (1..=dome.len()).filter(|&i| m.is_occluded(i, s.m0)).count();
    println!(
        "points = {}\nseen voxels = {}\nempty voxels = {}\nout of bounds = {}\noccluded viewpoints = {occluded}",
        f.points.len(),
        grid.seen_indices().len(),
        grid.count(dnbv::grid::VoxelLabel::Empty),
        grid.out_of_bounds()
    );
    Ok(())
}

fn score(config: &Path, frame: usize, current: usize, weights: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let s = load_scenario(config)?;
    let k = frame_index(&s, frame)?;
    let w = resolve_weights(weights, s.weights)?;
    let dome = s.build_dome()?;
    let joints = s.load_joints()?;
    let planner = Planner::new(&dome, &joints, s.planner_config(w));
    let state = planner.state_at(current, planner.observe(&s.load_frame(k)?))?;
    let candidates = candidate_set(&dome, &joints, current);
    let b = p_total(&state, &candidates, &w, s.m0, &dome, &joints)?;
    with_output(out, |o| write_breakdown_csv(&b, o))
}

fn plan_step(
    config: &Path,
    frame: usize,
    current: usize,
    weights: Option<&Path>,
    breakdown: Option<&Path>,
) -> Result<()> {
    let s = load_scenario(config)?;
    let k = frame_index(&s, frame)?;
    let w = resolve_weights(weights, s.weights)?;
    let dome = s.build_dome()?;
    let joints = s.load_joints()?;
    let planner = Planner::new(&dome, &joints, s.planner_config(w));
    let state = planner.state_at(current, planner.observe(&s.load_frame(k)?))?;
    let d = planner.decide(&state)?;
    if let Some(p) = breakdown {
        with_output(Some(p), |o| write_breakdown_csv(&d.breakdown, o))?;
    }
    if d.all_occluded {
        eprintln!("warning: every candidate viewpoint is occluded");
    }
    let best = d.breakdown.argmax();
    with_output(None, |o| {
        writeln!(o, "from = {}", d.from_index)?;
        writeln!(o, "to = {}", d.to_index)?;
        writeln!(o, "moved = {}", d.moved() as u8)?;
        writeln!(o, "geodesic_moved = {}", sig9(d.geodesic_moved))?;
        writeln!(o, "joint_moved = {}", sig9(d.joint_moved))?;
        writeln!(o, "angle_to = {}", sig9(d.angle_to))?;
        writeln!(o, "p_total = {}", sig9(best.p_total))?;
        writeln!(o, "occluders_from = {}", state.occlusion.count(d.from_index))?;
        writeln!(o, "occluders_to = {}", state.occlusion.count(d.to_index))?;
        writeln!(o, "all_occluded = {}", d.all_occluded as u8)?;
        writeln!(o, "target_occluded = {}", d.target_occluded as u8)
    })
}

fn replay(config: &Path, start: usize, weights: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let s = load_scenario(config)?;
    let w = resolve_weights(weights, s.weights)?;
    let dome = s.build_dome()?;
    let joints = s.load_joints()?;
    let planner = Planner::new(&dome, &joints, s.planner_config(w));
    let t = planner.replay(s.frames(), start)?;
    if t.decisions.iter().any(|d| d.all_occluded) {
        eprintln!("warning: some frames had every candidate occluded");
    }
    with_output(out, |o| t.write_csv(o))
}

/// Dome, joint table and per-scenario training pairs of a set.
fn training_inputs(set: &ScenarioSet) -> Result<(Dome, dnbv::joints::JointMap, Vec<dnbv::training::TrainingScenario>)> {
    let first = &set.scenarios[0];
    let dome = first.build_dome()?;
    let joints = first.load_joints()?;
    let scenarios = set
        .scenarios
        .iter()
        .map(|s| s.training_scenario(&dome))
        .collect::<Result<Vec<_>>>()?;
    Ok((dome, joints, scenarios))
}

fn train(config: &Path, out: &Path, explore: bool) -> Result<()> {
    let set = load_scenario_set(config)?;
    let (dome, joints, scenarios) = training_inputs(&set)?;
    let m0 = set.scenarios[0].m0;
    let sets = scenarios
        .iter()
        .map(|s| TrainingSet::from_scenario(s, &dome, &joints, m0))
        .collect::<Result<Vec<_>>>()?;
    let all = TrainingSet::concat(&sets);
    let fit = fit_set(&all, &set.alphas, set.targets)?;
    create_dir(out)?;
    write_weights(&out.join("weights.txt"), &fit.weights)?;

    if explore {
        let config = set.scenarios[0].planner_config(fit.weights);
        let rows = explore_alphas(&scenarios, &dome, &joints, &config, set.targets)?;
        with_output(Some(&out.join("behavior.csv")), |o| {
            writeln!(
                o,
                "alpha_s,alpha_d,alpha_theta,w_vis,w_nocc,w_dist,w_jt,residual,jumps,avg_distance,avg_z_increase"
            )?;
            for r in &rows {
                let w = r.fit.weights;
                writeln!(
                    o,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    sig9(r.alphas.alpha_s),
                    sig9(r.alphas.alpha_d),
                    sig9(r.alphas.alpha_theta),
                    sig9(w.vis),
                    sig9(w.nocc),
                    sig9(w.dist),
                    sig9(w.jt),
                    sig9(r.fit.train_residual),
                    r.metrics.jump_count,
                    sig9(r.metrics.avg_distance),
                    sig9(r.metrics.avg_z_increase)
                )?;
            }
            Ok(())
        })?;
    }

    if sets.len() >= 2 {
        let cv = cross_validate(&sets, set.split, &set.alphas, set.targets)?;
        with_output(Some(&out.join("cv.csv")), |o| {
            writeln!(o, "split,train,w_vis,w_nocc,w_dist,w_jt,train_residual,test_residual,train_pairs,test_pairs")?;
            for (k, s) in cv.splits.iter().enumerate() {
                let w = s.fit.weights;
                let train: Vec<String> = s.train.iter().map(|i| (i + 1).to_string()).collect();
                writeln!(
                    o,
                    "{},{},{},{},{},{},{},{},{},{}",
                    k + 1,
                    train.join(" "),
                    sig9(w.vis),
                    sig9(w.nocc),
                    sig9(w.dist),
                    sig9(w.jt),
                    sig9(s.fit.train_residual),
                    sig9(s.fit.test_residual.unwrap_or(0.0)),
                    s.train_pairs,
                    s.test_pairs
                )?;
            }
            Ok(())
        })?;
        let (mean, min, max) = cv.test_stats();
        println!(
            "splits = {}\ntest_residual_mean = {}\ntest_residual_min = {}\ntest_residual_max = {}",
            cv.splits.len(),
            sig9(mean),
            sig9(min),
            sig9(max)
        );
    }
    let w = fit.weights;
    println!(
        "w_vis = {}\nw_nocc = {}\nw_dist = {}\nw_jt = {}\nresidual = {}",
        sig9(w.vis),
        sig9(w.nocc),
        sig9(w.dist),
        sig9(w.jt),
        sig9(fit.train_residual)
    );
    Ok(())
}

fn eval(config: &Path, weights: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let set = load_scenario_set(config)?;
    let w = resolve_weights(weights, set.weights)?;
    let report = evaluate(&set.scenarios, &w)?;
    if let Some(p) = out {
        with_output(Some(p), |o| report.write_csv(o))?;
    }
    println!("cases = {}\nmatches = {}", report.total(), report.matches());
    for c in report.mismatches() {
        println!(
            "mismatch = {} {} expected {} chose {} ({})",
            c.scenario,
            c.initial,
            c.expected,
            c.decision.to_index,
            c.reason.map(|r| r.to_string()).unwrap_or_default()
        );
    }
    Ok(())
}

fn synth(config: &Path, out: &Path) -> Result<()> {
    let script = SynthScript::load(config)?;
    let result = generate_synthetic(&script, out)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    println!("manifest = {}", result.manifest.display());
    Ok(())
}

fn jointtable_synth(config: &Path, out: &Path, unreachable: &[usize]) -> Result<()> {
    let dome = Dome::build(&load_dome_config(config)?)?;
    let table = synth_joint_table(&dome, unreachable)?;
    table.write_csv(out)?;
    println!("reachable = {}\nsigma_sq = {}", table.reachable_count(), sig9(table.sigma_sq()));
    Ok(())
}
