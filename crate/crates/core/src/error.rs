use thiserror::Error;

/// Errors raised by the geometry, flow and scenario layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),

    #[error("tangent vector is based at a different point than the one supplied")]
    BaseMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("tangent norm {norm} is outside the admissible range (limit {limit})")]
    OutOfRange { norm: f64, limit: f64 },

    #[error("points are (nearly) antipodal: the minimal geodesic is not unique")]
    NonUniqueGeodesic,

    #[error("operation not supported: {0}")]
    Unsupported(&'static str),

    #[error("invalid convex body: {0}")]
    InvalidBody(String),

    #[error("point lies outside the tube B(Y, {epsilon}) around the body")]
    OutsideTube { epsilon: f64 },

    #[error("point is not in the convex body")]
    NotInBody,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("projection solver did not converge after {sweeps} sweeps")]
    SolverFailure { sweeps: usize },

    #[error("point lies outside the level-set patch: {0}")]
    OutOfPatch(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("time step {dt} exceeds the stability bound {limit}")]
    UnstableTimeStep { dt: f64, limit: f64 },

    #[error("flow aborted at t = {time}, node {node}: {reason}")]
    FlowAborted {
        time: f64,
        node: usize,
        reason: String,
    },

    #[error("scenario error at `{location}`: {message}")]
    Scenario { location: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
