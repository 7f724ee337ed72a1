mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use dnbv::dome::DomeConfig;
use dnbv::joints::synth_joint_table;
use dnbv::objective::ObjectiveWeights;
use dnbv::planner::Planner;
use dnbv::scenario::{
    default_grid, evaluate, export_dome_occlusion, two_hands_script, generate_synthetic, load_scenario, read_ply,
    write_index_pairs, write_ply, Blob, Scenario, SynthScript,
};
use dnbv::Error;
use nalgebra::Point3;
use proptest::prelude::*;

use common::reference_dome;

const IDENTITY: &str = "1 0 0 0 0 1 0 0 0 0 1 0 0 0 0 1\n";

/// A one-sensor, one-frame scenario directory; returns the manifest path.
fn minimal(dir: &Path, manifest: &str) -> PathBuf {
    fs::write(dir.join("poses.txt"), IDENTITY).unwrap();
    write_ply(&dir.join("f1.ply"), &[Point3::new(0.0, 0.0, 0.3)]).unwrap();
    let (dome, _) = reference_dome();
    synth_joint_table(&dome, &[41, 43, 44]).unwrap().write_csv(&dir.join("joints.csv")).unwrap();
    let path = dir.join("scene.txt");
    fs::write(&path, manifest).unwrap();
    path
}

const MINIMAL: &str = "sensors = poses.txt\nframes = f1.ply\njoints = joints.csv\n";

fn manifest_error(path: &Path) -> (String, Option<usize>) {
    match load_scenario(path) {
        Err(Error::Manifest { key, line, .. }) => (key, line),
        other => panic!("expected a manifest error, got {other:?}"),
    }
}

#[test]
fn minimal_manifest_fills_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let s = load_scenario(&minimal(dir.path(), MINIMAL)).unwrap();
    assert_eq!(s.name, "scene");
    assert_eq!(s.grid, default_grid());
    assert_eq!(s.dome, DomeConfig::default());
    assert_eq!(s.m0, 3);
    assert_eq!(s.frame_count(), 1);
    assert!(s.gt.is_empty() && s.permutation.is_none() && s.weights.is_none());
    assert_eq!(s.build_dome().unwrap().len(), 44);
    assert_eq!(s.load_frame(0).unwrap().points, vec![Point3::new(0.0, 0.0, 0.3)]);
}

#[test]
fn gt_outside_the_dome_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gt.csv"), "initial,expected\n1,2\n3,99\n").unwrap();
    let path = minimal(dir.path(), &format!("{MINIMAL}gt = gt.csv\n"));
    assert_eq!(manifest_error(&path), ("gt".to_string(), Some(4)));
}

#[test]
fn bad_manifests_name_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = minimal(dir.path(), "sensors = poses.txt\nframes = f1.ply\n");
    assert_eq!(manifest_error(&path).0, "joints");

    fs::write(&path, format!("{MINIMAL}# comment\nweights = missing.txt\n")).unwrap();
    assert_eq!(manifest_error(&path), ("weights".to_string(), Some(5)));

    fs::write(&path, format!("m0 = three\n{MINIMAL}")).unwrap();
    assert_eq!(manifest_error(&path), ("m0".to_string(), Some(1)));

    fs::write(&path, format!("{MINIMAL}grid.voxel = 0.02 0.01\n")).unwrap();
    assert_eq!(manifest_error(&path), ("grid.voxel".to_string(), Some(4)));

    fs::write(&path, format!("{MINIMAL}colour = red\n")).unwrap();
    assert_eq!(manifest_error(&path).0, "colour");

    fs::write(&path, "sensors = poses.txt\nframes = f1.ply f1.ply\njoints = joints.csv\n").unwrap();
    assert_eq!(manifest_error(&path), ("frames".to_string(), Some(2)));

    let err = load_scenario(&dir.path().join("nope.txt")).unwrap_err();
    assert!(matches!(err, Error::NotFound(_)) && err.is_validation());
}

#[test]
fn key_order_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [
        "name = scene",
        "m0 = 4",
        "dome.radius = 0.6",
        "sensors = poses.txt",
        "frames = f1.ply",
        "frames = f1.ply",
        "joints = joints.csv",
        "grid.voxel = 0.05",
    ];
    let a = load_scenario(&minimal(dir.path(), &lines.join("\n"))).unwrap();
    let mut shuffled = lines;
    shuffled.reverse();
    shuffled.swap(2, 5);
    let other = dir.path().join("other.txt");
    fs::write(&other, shuffled.join("\n")).unwrap();
    let b = load_scenario(&other).unwrap();
    assert_eq!(Scenario { manifest: other, ..a }, b);
}

fn synth(script: &SynthScript) -> (tempfile::TempDir, Scenario, Vec<Vec<usize>>) {
    let dir = tempfile::tempdir().unwrap();
    let out = generate_synthetic(script, dir.path()).unwrap();
    assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    let s = load_scenario(&out.manifest).unwrap();
    (dir, s, out.footprints)
}

fn occluded(s: &Scenario) -> Vec<BTreeSet<usize>> {
    let dome = s.build_dome().unwrap();
    s.occlusion_frames(&dome)
        .unwrap()
        .iter()
        .map(|m| (1..=dome.len()).filter(|&i| m.is_occluded(i, s.m0)).collect())
        .collect()
}

fn footprint_viewpoints(s: &Scenario, faces: &[usize]) -> BTreeSet<usize> {
    let dome = s.build_dome().unwrap();
    faces.iter().filter_map(|&f| dome.viewpoint_of_face(f)).collect()
}

#[test]
fn empty_table_occludes_nothing() {
    let (_dir, s, _) = synth(&SynthScript::new("clear", vec![Vec::new(), Vec::new()]));
    let dome = s.build_dome().unwrap();
    for m in s.occlusion_frames(&dome).unwrap() {
        assert_eq!(m.total(), 0);
    }
    assert!(!s.load_frame(0).unwrap().points.is_empty());
}

#[test]
fn polar_blob_flags_its_footprint() {
    let blob = Blob {
        polar: 0.0,
        azimuth: 0.0,
        radius: 0.3,
        density: 4,
    };
    let (_dir, s, footprints) = synth(&SynthScript::new("polar", vec![vec![blob]]));
    let expected = footprint_viewpoints(&s, &footprints[0]);
    assert!(expected.contains(&1));
    assert_eq!(occluded(&s)[0], expected);
}

#[test]
fn two_hands_masks_follow_the_script() {
    let (_dir, s, footprints) = synth(&two_hands_script());
    let got = occluded(&s);
    assert_eq!(got.len(), 5);
    for (k, faces) in footprints.iter().enumerate() {
        assert_eq!(got[k], footprint_viewpoints(&s, faces), "frame {}", k + 1);
    }
    // left-only then both sides
    assert!(got[1].is_subset(&got[2]) && got[1] != got[2]);
}

#[test]
fn export_lists_every_viewpoint() {
    let (dir, s, _) = synth(&two_hands_script());
    let dome = s.build_dome().unwrap();
    let m = &s.occlusion_frames(&dome).unwrap()[0];
    let obj = dir.path().join("dome.obj");
    export_dome_occlusion(m, &dome, s.m0, &obj).unwrap();
    let csv = fs::read_to_string(obj.with_extension("csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,face,count,occluded");
    assert_eq!(lines.len(), 45);
    let flagged = lines[1..].iter().filter(|l| l.ends_with(",1")).count();
    assert_eq!(flagged, (1..=44).filter(|&i| m.is_occluded(i, 3)).count());
    assert!(fs::read_to_string(&obj).unwrap().lines().any(|l| l.starts_with("f ")));
}

#[test]
fn replay_csv_is_reproducible() {
    let (dir, s, _) = synth(&two_hands_script());
    let csv = |name: &str| {
        let again = load_scenario(&s.manifest).unwrap();
        let dome = again.build_dome().unwrap();
        let joints = again.load_joints().unwrap();
        let planner = Planner::new(&dome, &joints, again.planner_config(ObjectiveWeights::reference()));
        let path = dir.path().join(name);
        planner.replay(again.frames(), 11).unwrap().save_csv(&path).unwrap();
        fs::read(path).unwrap()
    };
    let a = csv("a.csv");
    assert_eq!(a, csv("b.csv"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 6);
}

/// GT produced by the planner itself on the first frame.
fn self_gt(s: &Scenario, weights: &ObjectiveWeights) -> BTreeMap<usize, usize> {
    let dome = s.build_dome().unwrap();
    let joints = s.load_joints().unwrap();
    let planner = Planner::new(&dome, &joints, s.planner_config(*weights));
    let m = planner.observe(&s.load_frame(0).unwrap());
    (1..=dome.len())
        .map(|i| match planner.state_at(i, m.clone()) {
            Ok(state) => (i, planner.decide(&state).unwrap().to_index),
            Err(_) => (i, i),
        })
        .collect()
}

fn with_gt(s: &Scenario, extra: &str) -> Scenario {
    let text = fs::read_to_string(&s.manifest).unwrap();
    fs::write(&s.manifest, format!("{text}{extra}")).unwrap();
    load_scenario(&s.manifest).unwrap()
}

#[test]
fn evaluate_agrees_with_its_own_decisions() {
    let (dir, s, _) = synth(&two_hands_script());
    let w = ObjectiveWeights::reference();
    write_index_pairs(&dir.path().join("gt.csv"), ["initial", "expected"], &self_gt(&s, &w)).unwrap();
    let s = with_gt(&s, "gt = gt.csv\n");
    let report = evaluate(std::slice::from_ref(&s), &w).unwrap();
    assert_eq!(report.total(), s.load_joints().unwrap().reachable_count());
    assert_eq!(report.matches(), report.total());
    assert_eq!(report.mismatches().count(), 0);

    let other = ObjectiveWeights::new(0.0, 1.0, 0.0, 0.0).unwrap();
    let report = evaluate(std::slice::from_ref(&s), &other).unwrap();
    assert_eq!(report.total(), 41);
    assert!(report.mismatches().all(|c| c.reason.is_some()));
}

#[test]
fn empty_gt_gives_no_cases() {
    let (dir, s, _) = synth(&two_hands_script());
    fs::write(dir.path().join("gt.csv"), "initial,expected\n").unwrap();
    let s = with_gt(&s, "gt = gt.csv\n");
    assert_eq!(evaluate(&[s], &ObjectiveWeights::reference()).unwrap().total(), 0);
}

#[test]
fn permutation_renumbers_gt_and_joints() {
    let (dir, s, _) = synth(&two_hands_script());
    let plain = s.load_joints().unwrap();
    let reverse: BTreeMap<usize, usize> = (1..=44).map(|i| (i, 45 - i)).collect();
    write_index_pairs(&dir.path().join("perm.csv"), ["dataset", "index"], &reverse).unwrap();
    fs::write(dir.path().join("gt.csv"), "initial,expected\n1,2\n10,7\n").unwrap();
    let s = with_gt(&s, "permutation = perm.csv\ngt = gt.csv\n");
    assert_eq!(s.gt, BTreeMap::from([(44, 43), (35, 38)]));
    let permuted = s.load_joints().unwrap();
    for i in 1..=44 {
        assert_eq!(permuted.config(45 - i), plain.config(i));
    }
}

#[test]
fn unreachable_start_is_a_validation_error() {
    let (_dir, s, _) = synth(&two_hands_script());
    let dome = s.build_dome().unwrap();
    let joints = s.load_joints().unwrap();
    let planner = Planner::new(&dome, &joints, s.planner_config(ObjectiveWeights::reference()));
    let err = planner.replay(s.frames(), 41).unwrap_err();
    assert!(err.is_validation(), "{err}");
}

#[test]
fn tilted_script_blob_lands_off_pole() {
    let blob = Blob {
        polar: 0.5,
        azimuth: PI,
        radius: 0.2,
        density: 3,
    };
    let (_dir, s, footprints) = synth(&SynthScript::new("side", vec![vec![blob]]));
    let got = &occluded(&s)[0];
    assert!(!got.contains(&1) && !got.is_empty());
    assert_eq!(*got, footprint_viewpoints(&s, &footprints[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ply_round_trip(points in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 0..50)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let points: Vec<Point3<f64>> = points.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
        write_ply(&path, &points).unwrap();
        let back = read_ply(&path).unwrap();
        prop_assert_eq!(back.len(), points.len());
        for (a, b) in back.iter().zip(&points) {
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() <= 5e-9 * b[k].abs());
            }
        }
    }
}
