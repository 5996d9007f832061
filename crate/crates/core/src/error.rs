use thiserror::Error;

/// Errors raised by the lattice, operator and iteration layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate sequence: no valid entries to measure")]
    DegenerateSequence,

    #[error("box mismatch: {0}")]
    BoxMismatch(String),

    #[error("invalid lattice box: {0}")]
    InvalidBox(String),

    #[error("distal violation at (i={site:?}, k={offset:?}): divisor {divisor:e}")]
    DistalViolation {
        site: Vec<i64>,
        offset: Vec<i64>,
        divisor: f64,
    },

    #[error("tame range: s = {s} is below alpha0 = {alpha0}")]
    TameRange { s: f64, alpha0: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unreduced diagonal: max |G_ii| = {max_diag:e} exceeds tolerance {tol:e}")]
    UnreducedDiagonal { max_diag: f64, tol: f64 },

    #[error("fixed point stalled after {iterations} iterations, last defect {defect:e}")]
    FixedPointStalled { iterations: usize, defect: f64 },

    #[error("Neumann smallness failed: 4 C0^2 |W|_alpha0 = {value:e} > 1/2")]
    NeumannSmallness { value: f64 },

    #[error("singular operator: {0}")]
    Singular(String),

    #[error("pole proximity: site {site:?} lies {distance:e} from a pole")]
    PoleProximity { site: Vec<i64>, distance: f64 },

    #[error("rational frequency: |k.omega| vanishes at k = {k:?}")]
    RationalFrequency { k: Vec<i64> },

    #[error("symmetry defect: off-diagonal of Q^t Q is {offdiag:e} (tolerance {tol:e})")]
    SymmetryDefect { offdiag: f64, tol: f64 },

    #[error("spectrum comparison requires symmetry: {0}")]
    NotSymmetric(String),

    #[error("theory condition violated: {0}")]
    TheoryViolation(String),

    #[error("snapshot format: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
