//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown subsystem label {0}")]
    UnknownLabel(u32),

    #[error("overlapping pairing: label {0} appears twice")]
    OverlappingPairing(u32),

    #[error("dimension mismatch: operator is {op} but subsystem {label} has dimension {sub}")]
    DimensionMismatch { op: usize, sub: usize, label: u32 },

    #[error("subsystem specs of the two states differ")]
    SpecMismatch,

    #[error("double excitation attempt: subsystem {0} already holds a photon")]
    DoubleExcitation(u32),

    #[error("decay rate must be positive, got {0}")]
    NonPositiveRate(f64),

    #[error("network is not fully crossing: inputs {0} and {1} never meet")]
    DisconnectedNetwork(usize, usize),

    #[error("invalid network element: {0}")]
    InvalidElement(String),

    #[error("mode indices must be distinct")]
    ModesNotDistinct,

    #[error("quadrature failed to converge: estimated error {err:.3e} above tolerance {tol:.3e}")]
    QuadratureNoConverge { err: f64, tol: f64 },

    #[error("trajectory exceeded time cap with residual excitation {0:.3e}")]
    TrajectoryTimeCap(f64),

    #[error("detection record has zero probability")]
    ZeroNormRecord,

    #[error("vertex {a} is not a leaf of {b}")]
    NotALeaf { a: usize, b: usize },

    #[error("growth ledger condition violated: {0}")]
    ConditionViolated(String),

    #[error("attempt cap of {0} exceeded")]
    AttemptCap(usize),

    #[error("size guard: {what} limited to {max}, got {got}")]
    SizeGuard { what: &'static str, max: usize, got: usize },

    #[error("correction on qubit {0} cannot be pushed through a phase gate")]
    UnpushableCorrection(usize),

    #[error("quadratic fit residual {0:.3e} above 1e-6; outside the quadratic regime")]
    FitResidual(f64),

    #[error("infeasible measurement order: edge ({0}, {1}) cannot be created in time")]
    InfeasibleOrder(usize, usize),

    #[error("vertex {0} out of range for graph of {1} vertices")]
    VertexOutOfRange(usize, usize),

    #[error("lattice side must be at least 2, got {0}")]
    LatticeTooSmall(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no viable shifter placement found among {0} candidates")]
    CalibrationFailed(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
