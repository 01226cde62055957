//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is disconnected: vertex {unreached} is unreachable from vertex 0 ({reached} of {total} vertices reached)")]
    Disconnected {
        unreached: usize,
        reached: usize,
        total: usize,
    },

    #[error("edge ({u},{v}) has non-positive or non-finite weight {w}")]
    BadWeight { u: usize, v: usize, w: f64 },

    #[error("duplicate edge ({u},{v})")]
    DuplicateEdge { u: usize, v: usize },

    #[error("edge ({u},{v}) is a self-loop")]
    SelfLoop { u: usize, v: usize },

    #[error("vertex {v} out of range for space with {n} vertices")]
    VertexOutOfRange { v: usize, n: usize },

    #[error("space must have at least one vertex")]
    EmptySpace,

    #[error("distance matrix is not a metric: {reason}")]
    NotAMetric { reason: String },

    #[error("no edge between consecutive path vertices {u} and {v}")]
    MissingEdge { u: usize, v: usize },

    #[error("path is empty")]
    EmptyPath,

    #[error("path from {x} to {y} has length {len} but dist is {dist}; not a shortest path")]
    NotShortest {
        x: usize,
        y: usize,
        len: f64,
        dist: f64,
    },

    #[error("time {t} outside [0,1]")]
    TimeOutOfRange { t: f64 },

    #[error("time {t} is not vertex-aligned on this geodesic (nearest aligned time {nearest})")]
    TimeNotAligned { t: f64, nearest: f64 },

    #[error("mass at vertex {v} is negative or non-finite: {mass}")]
    BadMass { v: usize, mass: f64 },

    #[error("measure with total {total} is not a probability measure")]
    NotProbability { total: f64 },

    #[error("measure totals differ: {mu} vs {nu}")]
    UnequalTotals { mu: f64, nu: f64 },

    #[error("measure has empty support")]
    EmptySupport,

    #[error("measure length {got} does not match space vertex count {want}")]
    LengthMismatch { got: usize, want: usize },

    #[error("map undefined at vertex {v} which carries mass {mass}")]
    MapUndefined { v: usize, mass: f64 },

    #[error("density is undefined on {count} vertices carrying total mass {mass}; measure is not absolutely continuous")]
    NotAbsolutelyContinuous { count: usize, mass: f64 },

    #[error("radius ladder is empty")]
    EmptyLadder,

    #[error("radius ladder must be strictly decreasing and positive (offending radius {r})")]
    BadLadder { r: f64 },

    #[error("hop horizon must be at least 1")]
    BadHopHorizon,

    #[error("c-transform input is -inf everywhere")]
    AllNegativeInfinity,

    #[error("potential value at vertex {v} is not finite: {value}")]
    BadPotential { v: usize, value: f64 },

    #[error("simplex pivot limit {limit} exceeded")]
    IterationLimit { limit: usize },

    #[error("geodesic precondition violated: {reason}")]
    GeodesicPrecondition { reason: String },

    #[error("invalid parameter: {reason}")]
    InvalidParameter { reason: String },

    #[error("unsupported experiment {name}")]
    UnknownExperiment { name: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed {what} at line {line}: {reason}")]
    Parse {
        what: &'static str,
        line: usize,
        reason: String,
    },
}
