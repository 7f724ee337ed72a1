//! Brute-force references shared by the integration tests. None of these
//! call into the code path they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use dnbv::dome::{Dome, DomeConfig};
use dnbv::grid::{GridSpec, VoxelLabel};
use dnbv::joints::{synth_joint_table, JointMap};
use nalgebra::{Matrix4, Point3, Vector3, Vector4};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Chord length (meters) at or below which a ray only grazes a cell.
pub const GRAZE: f64 = 1e-9;

pub fn reference_dome() -> (Dome, JointMap) {
    let dome = Dome::build(&DomeConfig::default()).unwrap();
    let joints = synth_joint_table(&dome, &[41, 43, 44]).unwrap();
    (dome, joints)
}

/// Parameter interval of the segment `a + t (b - a)`, `t ∈ [0, 1]`, inside
/// the box `[lo, hi]`.
fn slab(a: &Point3<f64>, b: &Point3<f64>, lo: [f64; 3], hi: [f64; 3]) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for k in 0..3 {
        let d = b[k] - a[k];
        if d == 0.0 {
            if a[k] < lo[k] || a[k] > hi[k] {
                return None;
            }
        } else {
            let (u, v) = ((lo[k] - a[k]) / d, (hi[k] - a[k]) / d);
            t0 = t0.max(u.min(v));
            t1 = t1.min(u.max(v));
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

fn cell_box(spec: &GridSpec, c: [usize; 3]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for k in 0..3 {
        let size = spec.extents[k] / spec.resolution[k] as f64;
        lo[k] = spec.origin[k] + c[k] as f64 * size;
        hi[k] = lo[k] + size;
    }
    (lo, hi)
}

fn all_cells(spec: &GridSpec) -> impl Iterator<Item = [usize; 3]> + '_ {
    let [nx, ny, nz] = spec.resolution;
    (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| [x, y, z])))
}

/// Exact carving reference: every cell the segment passes through is found
/// by slab intersection, cells are ordered by entry parameter, and the
/// unseen ones before the first seen cell become empty. Returns the empty
/// set and the set of cells some ray only grazed.
pub fn carve_oracle(
    spec: &GridSpec,
    seen: &BTreeSet<[usize; 3]>,
    sensors: &[Point3<f64>],
) -> (BTreeSet<[usize; 3]>, BTreeSet<[usize; 3]>) {
    let mut empty = BTreeSet::new();
    let mut grazed = BTreeSet::new();
    for s in sensors {
        for target in seen {
            let (lo, hi) = cell_box(spec, *target);
            let center = Point3::new(
                0.5 * (lo[0] + hi[0]),
                0.5 * (lo[1] + hi[1]),
                0.5 * (lo[2] + hi[2]),
            );
            let len = (center - s).norm();
            if len == 0.0 {
                continue;
            }
            let mut hits: Vec<(f64, [usize; 3])> = Vec::new();
            for c in all_cells(spec) {
                let (lo, hi) = cell_box(spec, c);
                if let Some((t0, t1)) = slab(s, &center, lo, hi) {
                    if (t1 - t0) * len <= GRAZE {
                        grazed.insert(c);
                    } else {
                        hits.push((t0, c));
                    }
                }
            }
            hits.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (_, c) in hits {
                if seen.contains(&c) {
                    break;
                }
                empty.insert(c);
            }
        }
    }
    (empty, grazed)
}

pub fn labels_of(spec: &GridSpec, labels: &[VoxelLabel], want: VoxelLabel) -> BTreeSet<[usize; 3]> {
    all_cells(spec)
        .filter(|&c| labels[c[0] + spec.resolution[0] * (c[1] + spec.resolution[1] * c[2])] == want)
        .collect()
}

/// Cells holding at least one point, by hashing floor-divided coordinates.
/// Points on the far boundary face go to the last cell.
pub fn voxel_oracle(spec: &GridSpec, points: &[Point3<f64>]) -> (HashSet<[usize; 3]>, usize) {
    let mut set = HashSet::new();
    let mut outside = 0;
    for p in points {
        let mut cell = [0usize; 3];
        let mut inside = true;
        for k in 0..3 {
            let rel = p[k] - spec.origin[k];
            if rel < 0.0 || rel > spec.extents[k] || rel.is_nan() {
                inside = false;
                break;
            }
            let size = spec.extents[k] / spec.resolution[k] as f64;
            cell[k] = ((rel / size) as usize).min(spec.resolution[k] - 1);
        }
        if inside {
            set.insert(cell);
        } else {
            outside += 1;
        }
    }
    (set, outside)
}

/// Nearest face centroid over every hemisphere face, by exhaustive search.
/// Returns the face and the angular gap to the runner-up.
pub fn nearest_centroid(dome: &Dome, dir: &Vector3<f64>) -> (usize, f64) {
    let mesh = dome.mesh();
    let mut angles: Vec<(f64, usize)> = (0..mesh.face_count())
        .map(|f| {
            let c = mesh.centroid(f).normalize();
            (c.dot(dir).clamp(-1.0, 1.0).acos(), f)
        })
        .collect();
    angles.sort_by(|a, b| a.0.total_cmp(&b.0));
    (angles[0].1, angles[1].0 - angles[0].0)
}

/// Occluder counts by exhaustive nearest-centroid search.
pub fn occlusion_oracle(dome: &Dome, centers: &[Point3<f64>]) -> Vec<u32> {
    let mut counts = vec![0u32; dome.len()];
    let by_face: BTreeMap<usize, usize> = dome.viewpoints().iter().map(|v| (v.face_id, v.index)).collect();
    for c in centers {
        let rel = c - dome.center();
        let r = rel.norm();
        if r == 0.0 || r >= dome.radius() || rel.dot(dome.up()) <= 0.0 {
            continue;
        }
        let (face, _) = nearest_centroid(dome, &(rel / r));
        if let Some(i) = by_face.get(&face) {
            counts[i - 1] += 1;
        }
    }
    counts
}

/// Least-squares residual over a regular simplex lattice with spacing
/// `1 / steps`. Returns the best lattice point and its residual.
pub fn simplex_grid_min(rows: &[[f64; 4]], targets: &[f64], steps: usize) -> ([f64; 4], f64) {
    let mut gram = Matrix4::zeros();
    let mut rhs = Vector4::zeros();
    let mut tt = 0.0;
    for (r, &y) in rows.iter().zip(targets) {
        let x = Vector4::from(*r);
        gram += x * x.transpose();
        rhs += x * y;
        tt += y * y;
    }
    let mut best = ([0.0; 4], f64::INFINITY);
    let h = 1.0 / steps as f64;
    for a in 0..=steps {
        for b in 0..=steps - a {
            for c in 0..=steps - a - b {
                let d = steps - a - b - c;
                let w = Vector4::new(a as f64 * h, b as f64 * h, c as f64 * h, d as f64 * h);
                let r = (w.transpose() * gram * w)[0] - 2.0 * rhs.dot(&w) + tt;
                if r < best.1 {
                    best = ([w[0], w[1], w[2], w[3]], r);
                }
            }
        }
    }
    (best.0, best.1.max(0.0))
}

pub fn random_point_in(rng: &mut ChaCha8Rng, lo: [f64; 3], hi: [f64; 3]) -> Point3<f64> {
    Point3::new(
        rng.random_range(lo[0]..hi[0]),
        rng.random_range(lo[1]..hi[1]),
        rng.random_range(lo[2]..hi[2]),
    )
}

/// A random voxel center strictly inside the dome and above its base.
pub fn random_inside_dome(rng: &mut ChaCha8Rng, dome: &Dome) -> Point3<f64> {
    let r = dome.radius();
    loop {
        let p = dome.center() + Vector3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(0.0..r));
        let rel = p - dome.center();
        if rel.norm() < r && rel.norm() > 1e-6 && rel.dot(dome.up()) > 0.0 {
            return p;
        }
    }
}

/// Synthetic training corpus: the five-frame hand sequence, an empty
/// table, and `extra` seeded scenes of one or two random blobs per frame.
pub fn synthetic_corpus(dir: &std::path::Path, extra: usize, seed: u64) -> Vec<dnbv::scenario::Scenario> {
    use dnbv::scenario::{two_hands_script, generate_synthetic, load_scenario, Blob, SynthScript};
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scripts = vec![two_hands_script(), SynthScript::new("clear", vec![Vec::new(), Vec::new()])];
    for k in 0..extra {
        let frames = (0..4)
            .map(|_| {
                (0..rng.random_range(1..=2))
                    .map(|_| Blob {
                        polar: rng.random_range(0.0..0.6),
                        azimuth: rng.random_range(0.0..std::f64::consts::TAU),
                        radius: rng.random_range(0.15..0.4),
                        density: 4,
                    })
                    .collect()
            })
            .collect();
        scripts.push(SynthScript::new(&format!("random{k}"), frames));
    }
    scripts
        .iter()
        .map(|s| {
            let out = generate_synthetic(s, &dir.join(&s.name)).unwrap();
            load_scenario(&out.manifest).unwrap()
        })
        .collect()
}
