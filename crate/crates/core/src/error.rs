use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subdivision level {0} exceeds the supported maximum of {max}", max = crate::dome::MAX_SUBDIVISION)]
    SubdivisionTooDeep(u32),

    #[error("no viewpoint satisfies theta <= theta_lim = {0} rad")]
    NoAllowedViewpoints(f64),

    #[error(
        "no theta_lim yields exactly {requested} viewpoints (nearest counts: {below} and {above})"
    )]
    ViewpointCountUnreachable {
        requested: usize,
        below: usize,
        above: usize,
    },

    #[error("theta_lim must be positive and finite, got {0}")]
    InvalidThetaLimit(f64),

    #[error("viewpoint {0} is not an allowed viewpoint of the dome")]
    UnknownViewpoint(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid joint configuration: {0}")]
    InvalidJoints(String),

    #[error("need at least 3 reachable viewpoints to estimate the joint variance, found {0}")]
    TooFewReachable(usize),

    #[error("joint-distance variance is zero; the joint table is degenerate")]
    DegenerateJointVariance,

    #[error("candidate viewpoint {0} is unreachable")]
    UnreachableCandidate(usize),

    #[error("candidate set is empty")]
    EmptyCandidateSet,

    #[error("occlusion vector has {found} entries, dome has {expected} allowed viewpoints")]
    OcclusionLength { expected: usize, found: usize },

    #[error("weights are not identifiable: the design matrix is rank deficient")]
    NonIdentifiable,

    #[error("need at least {needed} training pairs, got {found}")]
    TooFewPairs { needed: usize, found: usize },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: key `{key}`{}: {msg}", path.display(), line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Manifest {
        path: PathBuf,
        key: String,
        line: Option<usize>,
        msg: String,
    },

    #[error("{}: file not found", .0.display())]
    NotFound(PathBuf),

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Errors caused by bad input (files, flags, configuration) rather than
    /// by a failure while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Frame { source, .. } => source.is_validation(),
            Error::Io { .. } | Error::EmptyCandidateSet | Error::NonIdentifiable => false,
            _ => true,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
