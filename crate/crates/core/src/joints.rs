//! Robot joint configurations per viewpoint and the joint-space scale
//! used by the joint-transition term.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::dome::{azimuth, azimuth_frame, Dome};
use crate::error::{Error, Result};

/// Number of arm joints.
pub const JOINT_COUNT: usize = 6;

/// Six joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig(pub [f64; JOINT_COUNT]);

impl JointConfig {
    pub fn new(angles: [f64; JOINT_COUNT]) -> Result<Self> {
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidJoints("joint angles must be finite".into()));
        }
        Ok(JointConfig(angles))
    }

    pub fn angles(&self) -> &[f64; JOINT_COUNT] {
        &self.0
    }

    pub fn distance_squared(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (b - a) * (b - a))
            .sum()
    }
}

/// Euclidean norm of the joint displacement, without angle wrapping.
pub fn joint_distance(a: &JointConfig, b: &JointConfig) -> f64 {
    a.distance_squared(b).sqrt()
}

/// Joint configuration of every viewpoint; `None` marks viewpoints the arm
/// cannot reach.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMap {
    configs: BTreeMap<usize, Option<JointConfig>>,
    sigma_sq: f64,
}

impl JointMap {
    /// Builds the map and its isotropic variance `σ²`.
    pub fn new(configs: BTreeMap<usize, Option<JointConfig>>) -> Result<Self> {
        let sigma_sq = sigma_sq_of(&configs)?;
        Ok(JointMap { configs, sigma_sq })
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn config(&self, index: usize) -> Option<&JointConfig> {
        self.configs.get(&index).and_then(|c| c.as_ref())
    }

    pub fn is_reachable(&self, index: usize) -> bool {
        self.config(index).is_some()
    }

    /// Reachable viewpoint indices, ascending.
    pub fn reachable(&self) -> impl Iterator<Item = usize> + '_ {
        self.configs
            .iter()
            .filter(|(_, c)| c.is_some())
            .map(|(&i, _)| i)
    }

    pub fn reachable_count(&self) -> usize {
        self.reachable().count()
    }

    /// Every viewpoint index listed in the table.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.configs.keys().copied()
    }

    pub fn entries(&self) -> &BTreeMap<usize, Option<JointConfig>> {
        &self.configs
    }

    /// Writes the table in the `index,j1,..,j6,reachable` format.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(out, "index,j1,j2,j3,j4,j5,j6,reachable").map_err(io)?;
        for (&index, config) in &self.configs {
            let (angles, flag) = match config {
                Some(c) => (c.0, 1),
                None => ([0.0; JOINT_COUNT], 0),
            };
            let cols: Vec<String> = angles.iter().map(|a| crate::format::sig9(*a)).collect();
            writeln!(out, "{index},{},{flag}", cols.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Population variance of the pairwise joint distances between reachable
/// viewpoints.
pub fn compute_sigma_sq(map: &JointMap) -> Result<f64> {
    sigma_sq_of(&map.configs)
}

fn sigma_sq_of(configs: &BTreeMap<usize, Option<JointConfig>>) -> Result<f64> {
    let reachable: Vec<&JointConfig> = configs.values().flatten().collect();
    if reachable.len() < 3 {
        return Err(Error::TooFewReachable(reachable.len()));
    }
    let mut distances = Vec::with_capacity(reachable.len() * (reachable.len() - 1) / 2);
    for (i, a) in reachable.iter().enumerate() {
        for b in &reachable[i + 1..] {
            distances.push(joint_distance(a, b));
        }
    }
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let var = distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(var > 1e-12 * mean.max(1e-300) * mean.max(1e-300)) {
        return Err(Error::DegenerateJointVariance);
    }
    Ok(var)
}

/// Reads an `index,j1,j2,j3,j4,j5,j6,reachable` table.
pub fn load_joint_table(path: &Path) -> Result<JointMap> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["index", "j1", "j2", "j3", "j4", "j5", "j6", "reachable"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut configs = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| record.get(k).unwrap_or_default();
        let index: usize = field(0)
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad viewpoint index `{}`", field(0))))?;
        if index == 0 {
            return Err(Error::parse(path, line, "viewpoint indices start at 1"));
        }
        let mut angles = [0.0; JOINT_COUNT];
        for (k, angle) in angles.iter_mut().enumerate() {
            *angle = field(k + 1)
                .parse()
                .ok()
                .filter(|a: &f64| a.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("bad joint value `{}`", field(k + 1))))?;
        }
        let reachable = match field(7) {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::parse(path, line, format!("bad reachable flag `{other}`")));
            }
        };
        let config = reachable.then_some(JointConfig(angles));
        if configs.insert(index, config).is_some() {
            return Err(Error::parse(path, line, format!("duplicate viewpoint index {index}")));
        }
    }
    if configs.is_empty() {
        return Err(Error::parse(path, 1, "joint table has no rows"));
    }
    JointMap::new(configs)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(1, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// A smooth, plausible joint table for a dome: base rotation follows the
/// viewpoint azimuth (wrapping at the −x meridian, where the arm has to
/// turn all the way round), the shoulder/elbow/wrist angles follow the
/// polar angle. Viewpoints listed in `unreachable` get no configuration.
pub fn synth_joint_table(dome: &Dome, unreachable: &[usize]) -> Result<JointMap> {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    let frame = azimuth_frame(dome.up());
    let configs = dome
        .viewpoints()
        .iter()
        .map(|vp| {
            let mut psi = azimuth(&vp.direction, &frame);
            if psi > PI {
                psi -= TAU;
            }
            let t = vp.theta;
            let angles = [
                psi,
                -FRAC_PI_2 + 0.9 * t,
                1.4 * t - 0.3,
                -FRAC_PI_2 - 0.5 * t,
                FRAC_PI_2 - 0.2 * t * psi.cos(),
                0.5 * psi,
            ];
            let config = (!unreachable.contains(&vp.index)).then_some(JointConfig(angles));
            (vp.index, config)
        })
        .collect();
    JointMap::new(configs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dome::DomeConfig;

    fn on_axis(values: &[f64]) -> BTreeMap<usize, Option<JointConfig>> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i + 1, Some(JointConfig([v, 0.0, 0.0, 0.0, 0.0, 0.0]))))
            .collect()
    }

    #[test]
    fn distance_basics() {
        let zero = JointConfig([0.0; 6]);
        let e1 = JointConfig([0.3, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(joint_distance(&zero, &zero), 0.0);
        assert!((joint_distance(&zero, &e1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn sigma_sq_population_variance() {
        // pairwise distances 0.2, 0.6, 0.4
        let map = JointMap::new(on_axis(&[0.0, 0.2, 0.6])).unwrap();
        let expected = ((0.2f64 - 0.4).powi(2) + 0.0 + (0.6f64 - 0.4).powi(2)) / 3.0;
        assert!((map.sigma_sq() - expected).abs() < 1e-15);
        assert!((map.sigma_sq() - 0.0267).abs() < 1e-4);
    }

    #[test]
    fn equidistant_configs_are_degenerate() {
        let s = 1.0 / 2f64.sqrt();
        let configs = [
            [s, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, s, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, s, 0.0, 0.0, 0.0],
        ]
        .into_iter()
        .enumerate()
        .map(|(i, a)| (i + 1, Some(JointConfig(a))))
        .collect();
        assert!(matches!(JointMap::new(configs), Err(Error::DegenerateJointVariance)));
        assert!(matches!(
            JointMap::new(on_axis(&[0.5, 0.5, 0.5, 0.5])),
            Err(Error::DegenerateJointVariance)
        ));
        assert!(matches!(JointMap::new(on_axis(&[0.1, 0.2])), Err(Error::TooFewReachable(2))));
    }

    #[test]
    fn load_marks_unreachable() {
        let dome = crate::dome::Dome::build(&DomeConfig::default()).unwrap();
        let map = synth_joint_table(&dome, &[6, 7, 8]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("joints.csv");
        map.write_csv(&path).unwrap();
        let loaded = load_joint_table(&path).unwrap();
        assert_eq!(loaded.reachable_count(), 41);
        assert!(!loaded.is_reachable(7));
        assert!(loaded.is_reachable(9));
        assert!((loaded.sigma_sq() - map.sigma_sq()).abs() < 1e-6 * map.sigma_sq());
    }

    fn write(content: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.csv");
        std::fs::File::create(&path).unwrap().write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn load_errors() {
        let (_d, empty) = write("");
        assert!(load_joint_table(&empty).is_err());
        let (_d, header_only) = write("index,j1,j2,j3,j4,j5,j6,reachable\n");
        assert!(load_joint_table(&header_only).is_err());
        let (_d, bad) = write("index,j1,j2,j3,j4,j5,j6,reachable\n1,0,0,0,0,0,0,1\n2,0,x,0,0,0,0,1\n");
        match load_joint_table(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let (_d, dup) = write(
            "index,j1,j2,j3,j4,j5,j6,reachable\n1,0,0,0,0,0,0,1\n2,1,0,0,0,0,0,1\n1,3,0,0,0,0,0,1\n",
        );
        assert!(matches!(load_joint_table(&dup), Err(Error::Parse { line: 4, .. })));
    }
}
