use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("bracket word is empty")]
    EmptyWord,

    #[error("letter {letter} out of range for a frame of {frame_len} fields")]
    LetterOutOfRange { letter: usize, frame_len: usize },

    #[error("polynomial literal: {0}")]
    Parse(String),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("free nilpotent frames are available for steps 2, 3 and 4, not {0}")]
    UnsupportedStep(u32),

    #[error("structure carries no grading weights")]
    WeightsAbsent,

    #[error("coordinates are not privileged at the origin: {0}")]
    NotPrivileged(String),

    #[error("empty time interval [{a}, {b}]")]
    EmptyInterval { a: f64, b: f64 },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Goh projection displacement {displacement:e} exceeds bound at t = {t}")]
    ProjectionTooLarge { t: f64, displacement: f64 },

    #[error("Jacobi consistency failure: |h1212 - h2112| = {residual:e}")]
    JacobiInconsistent { residual: f64 },

    #[error("need at least {needed} nodes, found {found}")]
    TooFewNodes { needed: usize, found: usize },

    #[error("matrix has no real eigenline ({0})")]
    NoEigenline(&'static str),

    #[error("radial collapse at s = {s}")]
    RadialCollapse { s: f64 },

    #[error("path too short: covers {covered}, need {needed}")]
    PathTooShort { covered: f64, needed: f64 },

    #[error("dichotomy inconclusive; extend s_max")]
    Inconclusive,

    #[error("smallness hypothesis fails on every window (best margin {margin:e})")]
    SmallnessViolated { margin: f64 },

    #[error("tail model residual {residual:e} exceeds 1%")]
    TailFitRejected { residual: f64 },

    #[error("w = {w} left the window (a/2, 2a) at s = {s}")]
    EllipticWindow { s: f64, w: f64 },

    #[error("h vanishes inside the rescaling interval near t = {t}")]
    VanishingH { t: f64 },

    #[error("rescaled dynamics inconsistent: relative residual {residual:e}")]
    RescaleInconsistent { residual: f64 },

    #[error("control not parallel to the reference direction at node {node} (angle {angle:e})")]
    NotParallel { node: usize, angle: f64 },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("singular matrix")]
    Singular,
}
