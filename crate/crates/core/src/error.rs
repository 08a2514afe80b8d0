use std::io;

use thiserror::Error;

use crate::trajectory::Violation;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: not a gradient trajectory file")]
    BadMagic,
    #[error("version mismatch: file has version {found}, supported version is {supported}")]
    VersionMismatch { found: u8, supported: u8 },
    #[error("truncated payload in {section}{}", timestep.map(|t| format!(" of timestep {t}")).unwrap_or_default())]
    Truncated { timestep: Option<usize>, section: String },
    #[error("invalid UTF-8 in {section}")]
    BadUtf8 { section: String },
    #[error("shape inconsistency: {0}")]
    ShapeInconsistency(String),
    #[error("invariant violations: {}", join(.0))]
    Invalid(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Errors from the basis, design and shard file formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: not a {kind} file")]
    BadMagic { kind: &'static str },
    #[error("version mismatch: file has version {found}, supported version is {supported}")]
    VersionMismatch { found: u8, supported: u8 },
    #[error("truncated payload in {section}")]
    Truncated { section: String },
    #[error("inconsistent file contents: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error)]
pub enum SubspaceError {
    #[error("subspace dimension {d_s} out of range [1, {max}]")]
    DimOutOfRange { d_s: usize, max: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("timestep {timestep}: {source}")]
    AtTimestep {
        timestep: usize,
        #[source]
        source: Box<SubspaceError>,
    },
    #[error("invalid trajectory: {0}")]
    Trajectory(#[from] TrajectoryError),
    #[error("singular value decomposition did not converge")]
    SvdFailed,
    #[error("{0}")]
    ThreadPool(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnlsError {
    #[error("empty problem: a is {rows}x{cols}")]
    Empty { rows: usize, cols: usize },
    #[error("shape mismatch: a has {rows} rows, b has length {b_len}")]
    ShapeMismatch { rows: usize, b_len: usize },
    #[error("non-finite value in the {0}")]
    NonFinite(&'static str),
    #[error("max_iter must be at least 1")]
    ZeroMaxIter,
}

#[derive(Debug, Error)]
pub enum PursuitError {
    #[error("budget {budget} out of range [1, {n}]")]
    Budget { budget: usize, n: usize },
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("empty candidate pool")]
    EmptyCandidatePool,
    #[error("column index {index} out of range for {n} columns")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("duplicate column index {0}")]
    DuplicateIndex(usize),
    #[error("{indices} indices but {weights} weights")]
    WeightsMismatch { indices: usize, weights: usize },
    #[error("nnls: {0}")]
    Nnls(#[from] NnlsError),
}

#[derive(Debug, Error)]
pub enum DistError {
    #[error("cannot split {timesteps} timesteps across {machines} machines")]
    Partition { machines: usize, timesteps: usize },
    #[error("machine {machine_id}: worker failed: {detail}")]
    WorkerFailed { machine_id: usize, detail: String },
    #[error("machine {machine_id}: timed out waiting for a response")]
    Timeout { machine_id: usize },
    #[error("machine {machine_id}: protocol version mismatch (got {found}, speak {supported})")]
    ProtocolVersion { machine_id: usize, found: u8, supported: u8 },
    #[error("machine {machine_id}: protocol error: {detail}")]
    Protocol { machine_id: usize, detail: String },
    #[error("machine {machine_id}: remote error {code}: {detail}")]
    Remote { machine_id: usize, code: u32, detail: String },
    #[error("run aborted after {completed_iterations} completed iterations (residual {last_residual:.6e}): {source}")]
    Aborted { completed_iterations: usize, last_residual: f64, source: Box<DistError> },
    #[error("transport error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Pursuit(#[from] PursuitError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl DistError {
    /// The machine the error is attributed to, when there is one.
    pub fn machine_id(&self) -> Option<usize> {
        match self {
            DistError::WorkerFailed { machine_id, .. }
            | DistError::Timeout { machine_id }
            | DistError::ProtocolVersion { machine_id, .. }
            | DistError::Protocol { machine_id, .. }
            | DistError::Remote { machine_id, .. } => Some(*machine_id),
            DistError::Aborted { source, .. } => source.machine_id(),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("{combinations} candidate supports exceed the exhaustive-search limit of {limit}")]
    CombinatorialGuard { combinations: u128, limit: u128 },
    #[error(transparent)]
    Pursuit(#[from] PursuitError),
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Nnls(#[from] NnlsError),
    #[error(transparent)]
    Pursuit(#[from] PursuitError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// `true` for problems with the inputs (flags, files, shapes) as opposed
    /// to failures while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Trajectory(TrajectoryError::Io(_)) | Error::Format(FormatError::Io(_)) => false,
            Error::Trajectory(_) | Error::Format(_) | Error::Config(_) | Error::Json(_) => true,
            Error::Subspace(e) => !matches!(e, SubspaceError::SvdFailed | SubspaceError::ThreadPool(_)),
            Error::Nnls(_) => true,
            Error::Pursuit(e) => !matches!(e, PursuitError::Nnls(_)),
            Error::Synth(e) => !matches!(e, SynthError::Pursuit(_)),
            Error::Dist(e) => matches!(e, DistError::Partition { .. } | DistError::Format(_)),
            Error::Io { .. } => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
