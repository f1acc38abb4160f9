use thiserror::Error;

/// Errors raised across network construction, analysis and the oracles.
#[derive(Debug, Error)]
pub enum Error {
    #[error("edge {i}->{j} has non-positive weight {w}")]
    NonPositiveWeight { i: usize, j: usize, w: f64 },

    #[error("edge {i}->{j} listed more than once")]
    DuplicateEdge { i: usize, j: usize },

    #[error("node {node} out of range for a network with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("self-loop on node {0} is not allowed here")]
    SelfLoop(usize),

    #[error("invalid node set: {0}")]
    InvalidNodeSet(String),

    #[error("network is not internally stable: spectral radius {rho}")]
    UnstableNetwork { rho: f64 },

    #[error("Laplacian spectral condition violated: rho(L) = {rho_l} (must be < {limit})")]
    SpectralConditionViolated { rho_l: f64, limit: f64 },

    #[error("network graph is not connected")]
    Disconnected,

    #[error("modification ({s},{t},{w}) would leave a negative weight")]
    NegativeResultingWeight { s: usize, t: usize, w: f64 },

    #[error("generated network has zero spectral radius after {attempts} attempts")]
    ZeroSpectralRadius { attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires a {expected} network")]
    WrongKind { expected: &'static str },

    #[error("(I - A) is singular or its inverse is not non-negative")]
    SingularResolvent,

    #[error("walk-energy accumulation did not converge within {iterations} iterations")]
    TruncationNotConverged { iterations: usize },

    #[error("Lyapunov iteration did not converge within {iterations} doublings")]
    LyapunovNotConverged { iterations: usize },

    #[error("weight {w} outside the admissible range for edge ({s},{t}): must be >= {lower}")]
    WeightOutOfRange { s: usize, t: usize, w: f64, lower: f64 },

    #[error("H2 lower bound holds only for w >= 0, got {w} on edge ({s},{t})")]
    BoundNotCertified { s: usize, t: usize, w: f64 },

    #[error("weight {w} on edge ({s},{t}) reaches the stability margin {margin}")]
    DestabilizingWeight { s: usize, t: usize, w: f64, margin: f64 },

    #[error("no admissible edge left to select")]
    NoAdmissibleEdge,

    #[error("coherence requires inputs and outputs on every node")]
    AllNodeInputRequired,

    #[error("degenerate rank-one update: alpha1 = {alpha1}, alpha2 = {alpha2}")]
    DegenerateAlpha { alpha1: f64, alpha2: f64 },

    #[error("system is not internally stable: spectral radius {rho}")]
    UnstableSystem { rho: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("horizon {horizon} too short: rho^T = {decay} (need < 1e-3)")]
    HorizonTooShort { horizon: usize, decay: f64 },

    #[error("numerical invariant violated: {0}")]
    InvariantViolated(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed input rather than by a network
    /// failing one of its dynamical invariants.
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveWeight { .. }
                | Error::DuplicateEdge { .. }
                | Error::NodeOutOfRange { .. }
                | Error::SelfLoop(_)
                | Error::InvalidNodeSet(_)
                | Error::Parse(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
