//! Error types shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not Hermitian at entry ({0},{1})")]
    NotHermitian(usize, usize),
    #[error("square root of a negative value")]
    NegativeSqrt,
    #[error("interval division by an interval containing zero")]
    IntervalDivByZero,
    #[error("exact linear system is inconsistent (rank {rank} of {rows} equations)")]
    InconsistentSystem { rank: usize, rows: usize },
    #[error("precision {0} bits exhausted; retry with higher precision")]
    PrecisionExhausted(u32),
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series has vanishing linear coefficient; not a coordinate change")]
    NotInvertible,
    #[error("series order {have} too small; need at least {need}")]
    OrderTooSmall { have: usize, need: usize },
    #[error("evaluation point is a pole of the coordinate")]
    PoleAtPoint,
}

#[derive(Debug, Error)]
pub enum ModuleError {
    #[error("operator {op} needs levels through {need} but module `{module}` is cut off at {have}")]
    Truncated { op: String, module: String, need: usize, have: usize },
    #[error("module mismatch: expected `{expected}`, got `{got}`")]
    Mismatch { expected: String, got: String },
    #[error("negative L0 eigenvalue detected; module is not unitary")]
    NegativeWeight,
    #[error("Gram matrix at level {0} is not positive definite")]
    GramNotPositive(usize),
}

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("missing branch data: {0}")]
    MissingArg(String),
    #[error("evaluation leaves the valid truncation window: {0}")]
    WindowExceeded(String),
    #[error("geometry is not a positive trinion: {0}")]
    NotPositiveTrinion(String),
    #[error("rational function has a pole at {0}, which is not a marked point")]
    PoleOffMarkedSet(String),
    #[error("symbolic prefactor has an unresolved branch pairing")]
    UnresolvedBranch,
    #[error(transparent)]
    Module(#[from] ModuleError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Error)]
pub enum SewError {
    #[error("sewn slots carry incompatible modules: {0}")]
    SlotMismatch(String),
    #[error("sewing parameter q={q} is outside the admissible range (0, {limit})")]
    OutOfRange { q: String, limit: String },
    #[error("radius condition r·rho > 1 unmet for double sewing")]
    RadiusCondition,
    #[error(transparent)]
    Block(#[from] BlockError),
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("window too small: residual {residual:.3e} above threshold {threshold:.3e}; suggested depth {suggested}")]
    WindowTooSmall { residual: f64, threshold: f64, suggested: usize },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Sew(#[from] SewError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
